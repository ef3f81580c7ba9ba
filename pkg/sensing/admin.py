from django.contrib import admin

from .models import ExperimentRun, PolicyRecord


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'preset', 'detector', 'seed', 'trials', 'row_count', 'created_at')
    list_filter = ('preset',)
    readonly_fields = ('created_at',)


@admin.register(PolicyRecord)
class PolicyRecordAdmin(admin.ModelAdmin):
    list_display = ('name', 'mode', 'one_threshold', 'M', 'K', 'grid_size', 'created_at')
    list_filter = ('mode',)
    search_fields = ('name',)
