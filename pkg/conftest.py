import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'localnonlocal.settings')
django.setup()
