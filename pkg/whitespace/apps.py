from django.apps import AppConfig


class WhitespaceConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'whitespace'
    verbose_name = 'WiFi white-space prediction'
