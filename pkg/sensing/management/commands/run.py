from dataclasses import replace

from django.core.management.base import BaseCommand

from sensing.experiments import MAX_SEED, Preset
from sensing.services import ConfigService, ExperimentService

from ._errors import exit_codes


def seed_value(text):
    value = int(text, 0)
    if not 0 <= value <= MAX_SEED:
        raise ValueError(text)
    return value


class Command(BaseCommand):
    help = "Run an experiment preset and write its CSV table with a parameter sidecar."

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help="INI experiment file")
        parser.add_argument('--preset', choices=[preset.value for preset in Preset])
        parser.add_argument('--seed', type=seed_value, help="unsigned 64-bit seed")
        parser.add_argument('--trials', type=int)
        parser.add_argument('--out', help="output directory")

    def handle(self, *args, **options):
        with exit_codes('run'):
            bundle = ConfigService.load_config(options['config'])
            changes = {
                'preset': options['preset'],
                'seed': options['seed'],
                'trials': options['trials'],
                'output_path': options['out'],
            }
            spec = replace(bundle.experiment, **{key: value for key, value in changes.items() if value is not None})
            run = ExperimentService.run_experiment(spec, bundle)
        self.stdout.write(self.style.SUCCESS(f"run {run.id}: {run.row_count} rows in {run.csv_path}"))
