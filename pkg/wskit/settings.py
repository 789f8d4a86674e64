from pathlib import Path
from decouple import config, Csv


BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='wskit-insecure-local-only-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition
# No web surface: the app only contributes management commands and tests
INSTALLED_APPS = [
    'whitespace',
]

# Nothing is persisted, every run is file-driven
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Pipeline defaults
# Every value can be overridden from the environment or a .env file, and every
# management command flag overrides these in turn.
WHITESPACE = {
    'T_S': config('WSKIT_T_S', default=5.0, cast=float),
    'X_S': config('WSKIT_X_S', default=300.0, cast=float),
    'K': config('WSKIT_K', default=1, cast=int),
    'Z_S': config('WSKIT_Z_S', default=300.0, cast=float),
    'SEED': config('WSKIT_SEED', default=0, cast=int),
    'PARETO_SCALE_MS': config('WSKIT_PARETO_SCALE_MS', default=4.256, cast=float),
    'WINDOW_COUNT': config('WSKIT_WINDOW_COUNT', default=20, cast=int),
    'BW_TOL': config('WSKIT_BW_TOL', default=1e-6, cast=float),
    'BW_MAX_ITERS': config('WSKIT_BW_MAX_ITERS', default=500, cast=int),
    'N_JOBS': config('WSKIT_N_JOBS', default=1, cast=int),
    'HOLDOUT_S': config('WSKIT_HOLDOUT_S', default=300.0, cast=float),
    'X_GRID': config('WSKIT_X_GRID', default='60,120,240,480,960,1920,2400', cast=Csv(float)),
    'Z_GRID': config('WSKIT_Z_GRID', default='60,120,300,600,960', cast=Csv(float)),
}

# Environment presets from the office / home deployments
WHITESPACE_PRESETS = {
    'office': {'X_S': 300.0, 'K': 1, 'Z_S': 300.0},
    'home': {'X_S': 500.0, 'K': 2, 'Z_S': 960.0},
}


# Logging
# Diagnostics go to stderr as machine-readable "level,module,message" lines
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'filters': {
        'module_name': {
            '()': 'whitespace.log.ModuleNameFilter',
        },
    },
    'formatters': {
        'diagnostic': {
            'format': '%(levelname)s,%(module)s,%(message)s',
        },
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'diagnostic',
            'filters': ['module_name'],
        },
    },
    'loggers': {
        'whitespace': {
            'handlers': ['stderr'],
            'level': config('WSKIT_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}
