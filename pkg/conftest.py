import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'wskit.settings')
django.setup()
