from django.core.management.base import BaseCommand

from sensing.services import ConfigService

from ._errors import exit_codes


class Command(BaseCommand):
    help = "Check an experiment config file and print the resolved parameters."

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help="INI experiment file")

    def handle(self, *args, **options):
        with exit_codes('validate'):
            bundle = ConfigService.load_config(options['config'])
        scenario, cost, fading, experiment = bundle
        self.stdout.write(f"scenario: {scenario.as_dict()}")
        self.stdout.write(f"cost: {cost.as_dict()}")
        self.stdout.write(f"fading: {fading.as_dict() if fading else 'off'}")
        self.stdout.write(f"experiment: {experiment.as_dict()}")
        self.stdout.write(self.style.SUCCESS(f"{options['config']} is valid"))
