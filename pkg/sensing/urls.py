from django.urls import path
from . import views

urlpatterns = [
    path('policies/<str:name>/', views.policy_thresholds, name='policy_thresholds'),
    path('runs/<int:run_id>/', views.experiment_run, name='experiment_run'),
]
