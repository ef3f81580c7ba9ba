# Generated by Django 5.0.7 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('preset', models.CharField(max_length=64)),
                ('detector', models.CharField(blank=True, max_length=32)),
                ('seed', models.CharField(max_length=20)),
                ('trials', models.PositiveIntegerField()),
                ('parameters', models.JSONField(default=dict)),
                ('csv_path', models.CharField(max_length=500)),
                ('metadata_path', models.CharField(max_length=500)),
                ('row_count', models.PositiveIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'indexes': [models.Index(fields=['preset'], name='sensing_run_preset_idx'), models.Index(fields=['created_at'], name='sensing_run_created_idx')],
            },
        ),
        migrations.CreateModel(
            name='PolicyRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=255)),
                ('mode', models.CharField(max_length=32)),
                ('one_threshold', models.BooleanField(default=False)),
                ('M', models.PositiveIntegerField()),
                ('K', models.PositiveIntegerField()),
                ('grid_size', models.PositiveIntegerField()),
                ('format_version', models.PositiveSmallIntegerField()),
                ('thresholds', models.JSONField(default=list)),
                ('file_path', models.CharField(max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'indexes': [models.Index(fields=['name', 'created_at'], name='sensing_policy_name_idx')],
            },
        ),
    ]
