"""
Shared plumbing for the whitespace management commands: common flags,
settings/preset defaults, trace loading and error translation.
"""
import logging
from typing import Dict, List, Optional, Sequence

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from whitespace.exceptions import WhitespaceError
from whitespace.mmpp import y_lower_bound
from whitespace.reports import dumps, write_json
from whitespace.trace_io import PacketTrace, load_trace, merge_traces

logger = logging.getLogger(__name__)

# Validation errors that are not WhitespaceErrors (bad flag values) exit like input errors
USAGE_EXIT_CODE = 2


class WhitespaceCommand(BaseCommand):
    """
    Base class: translates WhitespaceError into CommandError with the error's
    exit code after logging an ERROR diagnostic for the raising module.
    """
    requires_system_checks = []

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except WhitespaceError as e:
            logging.getLogger(f'whitespace.{e.module or "cli"}').error(str(e))
            raise CommandError(f"{e.module}: {e}" if e.module else str(e), returncode=e.exit_code) from e
        except (ValueError, FileNotFoundError, KeyError) as e:
            logger.error(str(e))
            raise CommandError(str(e), returncode=USAGE_EXIT_CODE) from e

    # --- flags ---

    def add_traces_argument(self, parser, required: bool = True):
        parser.add_argument('--traces', nargs='+', required=required, metavar='PATH',
                            help='Trace CSV files (ts_us,channel,len_bytes); several files are merged')

    def add_output_argument(self, parser, required: bool = False):
        parser.add_argument('-o', '--output', required=required, metavar='PATH',
                            help='Output file (stdout when omitted)')

    def add_seed_argument(self, parser):
        parser.add_argument('--seed', type=int, default=None, help='Seed for every stochastic stage')

    def add_slot_arguments(self, parser):
        parser.add_argument('--t', type=float, default=None, dest='t_s', help='Slot period T in seconds')
        parser.add_argument('--y-ms', type=float, default=None, dest='y_ms',
                            help='Observation window length in ms (overrides k * y_lb)')
        parser.add_argument('--k', type=int, default=None, help='Window length multiplier of y_lb')

    def add_environment_argument(self, parser):
        parser.add_argument('--environment', choices=sorted(settings.WHITESPACE_PRESETS), default=None,
                            help='Preset for x, k and z')

    # --- helpers ---

    def setting(self, options: Dict, option: str, key: str):
        """Flag value, else the environment preset, else settings.WHITESPACE."""
        value = options.get(option)
        if value is not None:
            return value
        preset = settings.WHITESPACE_PRESETS.get(options.get('environment') or '', {})
        if key in preset:
            return preset[key]
        return settings.WHITESPACE[key]

    def seed(self, options: Dict) -> int:
        seed = self.setting(options, 'seed', 'SEED')
        if seed < 0:
            raise ValueError(f"--seed must be non-negative, got {seed}")
        return seed

    def slot_period(self, options: Dict) -> float:
        t_s = self.setting(options, 't_s', 'T_S')
        if not t_s > 0:
            raise ValueError(f"--t must be positive, got {t_s}")
        return t_s

    def multiplier(self, options: Dict) -> int:
        k = self.setting(options, 'k', 'K')
        if k < 1:
            raise ValueError(f"--k must be at least 1, got {k}")
        return k

    def load_traces(self, paths: Sequence[str]) -> List[PacketTrace]:
        return [load_trace(path) for path in paths]

    def load_merged(self, paths: Sequence[str]) -> PacketTrace:
        return merge_traces(self.load_traces(paths))

    def emit_json(self, data: Dict, output: Optional[str]):
        if output:
            write_json(data, output)
            logger.info(f"Wrote {output}")
        else:
            self.stdout.write(dumps(data), ending='')

    def window_length(self, options: Dict, mmpp=None) -> float:
        """--y-ms when given, else k * y_lb of the fitted MMPP(2)."""
        if options.get('y_ms') is not None:
            if not options['y_ms'] > 0:
                raise ValueError(f"--y-ms must be positive, got {options['y_ms']}")
            return options['y_ms']
        if mmpp is None:
            raise ValueError('--y-ms is required when no MMPP(2) parameters are given')
        return self.multiplier(options) * y_lower_bound(mmpp)
