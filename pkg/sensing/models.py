# models.py
from django.db import models


class ExperimentRun(models.Model):
    preset = models.CharField(max_length=64)
    detector = models.CharField(max_length=32, blank=True)
    seed = models.CharField(max_length=20)  # decimal digits; u64 overflows SQLite integers
    trials = models.PositiveIntegerField()
    parameters = models.JSONField(default=dict)
    csv_path = models.CharField(max_length=500)
    metadata_path = models.CharField(max_length=500)
    row_count = models.PositiveIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        indexes = [
            models.Index(fields=['preset'], name='sensing_run_preset_idx'),
            models.Index(fields=['created_at'], name='sensing_run_created_idx'),
        ]

    def __str__(self):
        return f"{self.preset} seed={self.seed} ({self.trials} trials)"


class PolicyRecord(models.Model):
    name = models.CharField(max_length=255)
    mode = models.CharField(max_length=32)
    one_threshold = models.BooleanField(default=False)
    M = models.PositiveIntegerField()
    K = models.PositiveIntegerField()
    grid_size = models.PositiveIntegerField()
    format_version = models.PositiveSmallIntegerField()
    thresholds = models.JSONField(default=list)  # per stage, null for an infinite threshold
    file_path = models.CharField(max_length=500)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        indexes = [
            models.Index(fields=['name', 'created_at'], name='sensing_policy_name_idx'),
        ]

    def __str__(self):
        return f"{self.name} ({self.mode}, M={self.M}, K={self.K})"
