from django.apps import AppConfig


class WindcorrConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'windcorr'
    verbose_name = 'Wind farm correlation analysis'
