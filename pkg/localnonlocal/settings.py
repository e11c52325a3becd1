"""
Django settings for the localnonlocal project.

The project has no web surface: Django provides configuration, input
validation, management commands and the test runner for the coupled
local/nonlocal diffusion solver.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""
import os
from pathlib import Path
from dotenv import load_dotenv
# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv()

# Only used by Django internals (signing); nothing here is secret.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'localnonlocal-insecure-development-key')

DEBUG = os.getenv('DJANGO_DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'core',
    'kernels',
    'discretization',
    'energy',
    'evolution',
    'analysis',
    'simulations',
]

# No ORM tables: every domain type is an in-memory value.
DATABASES = {}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Internationalization
LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Simulation output

SIMULATION_OUTPUT_DIR = Path(os.getenv('SIMULATION_OUTPUT_DIR', BASE_DIR / 'output'))

# Threads used for independent sweep members
SIMULATION_WORKERS = int(os.getenv('SIMULATION_WORKERS', '4'))

SIMULATION_DEFAULT_CONFIG = BASE_DIR / 'configs' / 'default.cfg'


# Logging

SIMULATION_LOG_LEVEL = os.getenv('SIMULATION_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': SIMULATION_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('core', 'kernels', 'discretization', 'energy', 'evolution', 'analysis', 'simulations')
    },
}
