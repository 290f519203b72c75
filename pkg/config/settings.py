"""
Django settings for the windcorr project.

Generated by 'django-admin startproject' using Django 3.2.4 and trimmed to a
database-free project: windcorr only uses Django for its settings, logging
configuration, management commands and test runner.

For more information on this file, see
https://docs.djangoproject.com/en/4.2/topics/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'WINDCORR_SECRET_KEY',
    'django-insecure-windcorr-7g2$q!v0k3m#t9x4w8e1r6y5u2i0o'
)

DEBUG = os.environ.get('WINDCORR_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'windcorr',
]

MIDDLEWARE = []


# Database
# windcorr keeps no persistent state; every artifact is a file.

DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging

LOG_LEVEL = os.environ.get('WINDCORR_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(process)d/%(thread)d %(levelname)+8s '
                      '%(filename)+32s:%(lineno)-5d %(funcName)-32s %(message)s',
            'datefmt': '%Y/%m/%d %H:%M:%S',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'windcorr': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Analysis defaults (Riffgat-style settings: 10 min records, half-day windows)

WINDCORR = {
    'STEP': 600,
    'HIGH_RES_STEP': 10,
    'WINDOW': '12h',
    'STRIDE': '12h',
    'MODE': 'reduced',
    'MAX_WIND_SPEED': 30.0,
    'JOBS': 1,
    'MATRIX_DIGITS': 15,
    'ZERO_VARIANCE_RTOL': 1e-12,
    'DEGENERATE_RESULTANT': 1e-9,
    'WAKE_DECAY': 0.05,
    'THRESHOLDS': {
        'dens_min': 0.6,
        'dens_dev_min': 0.1,
        'psi10_max': -1000.0,
        'shutdown_wind_max': 4.0,
        'shutdown_farm_min': 20,
        'dens_window': 12 * 3600,
        'psi_window': 600,
    },
}
