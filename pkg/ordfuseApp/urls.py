"""
URL configuration for ordfuseApp project.

The read-only API serves solved policy thresholds and experiment run
metadata; everything else happens through the management commands.
"""

from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/v1/', include('sensing.urls')),
]
