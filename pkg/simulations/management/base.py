from django.core.management.base import BaseCommand

from simulations.config import load_config
from simulations.services import output_storage


class SimulationCommand(BaseCommand):
    """Options shared by every run command: --config, --out, --set, --svg."""

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Run configuration (key = value lines)')
        parser.add_argument('--out', help='Output directory; overrides output.dir')
        parser.add_argument(
            '--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
            help='Override one config key; repeatable',
        )
        parser.add_argument('--svg', action='store_true', help='Also write SVG plots')

    def load(self, options):
        config = load_config(options['config'], options['overrides'], options['out'])
        return config, output_storage(config)

    def report_artifacts(self, storage, artifacts):
        for name in artifacts:
            self.stdout.write(storage.path(name))
