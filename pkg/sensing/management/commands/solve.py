from django.core.management.base import BaseCommand

from sensing.services import ConfigService, PolicyService

from ._errors import exit_codes


class Command(BaseCommand):
    help = "Solve the stopping policy of a config by backward induction and save it."

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help="INI experiment file")
        parser.add_argument('--out', required=True, help="policy file to write")
        parser.add_argument('--name', help="name served by the policy API, defaults to the file stem")
        parser.add_argument('--one-threshold', action='store_true', help="never declare H1 before the last stage")

    def handle(self, *args, **options):
        with exit_codes('solve'):
            bundle = ConfigService.load_config(options['config'])
            policy, record = PolicyService.solve_policy(
                bundle, options['out'], name=options['name'], one_threshold=options['one_threshold']
            )
        for stage in record.thresholds:
            self.stdout.write(f"k={stage['k']}: pi_low={stage['pi_low']} pi_high={stage['pi_high']}")
        self.stdout.write(self.style.SUCCESS(f"policy {record.name} saved to {record.file_path}"))
