from core.decorators import exit_codes
from core.exceptions import InvalidParameter
from simulations.management.base import SimulationCommand
from simulations.services import run_sweep
from utils.utils import parse_float_list

DEFAULT_EPSILONS = '0.4,0.2,0.1,0.05'


class Command(SimulationCommand):
    help = 'Compare coupled solutions for decreasing epsilon against the heat reference'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--eps', default=DEFAULT_EPSILONS, help='Comma separated, strictly decreasing')

    @exit_codes
    def handle(self, *args, **options):
        try:
            eps_list = parse_float_list(options['eps'])
        except ValueError as exc:
            raise InvalidParameter(f"--eps: {exc}") from exc
        config, storage = self.load(options)
        artifacts = run_sweep(config, eps_list, storage, svg=options['svg'])
        self.report_artifacts(storage, artifacts)
        self.stdout.write(self.style.SUCCESS(f"sweep_epsilon: {len(eps_list)} members, results in {storage.location}"))
