from core.decorators import exit_codes
from simulations.management.base import SimulationCommand
from simulations.services import run_spectrum


class Command(SimulationCommand):
    help = 'Estimate the spectral gap beta1 and the energy-control constant of the configured generator'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--pure-heat', action='store_true',
            help='Use the Neumann heat generator on (-1, 1) with grid.n_local cells instead',
        )

    @exit_codes
    def handle(self, *args, **options):
        config, storage = self.load(options)
        artifacts = run_spectrum(config, storage, svg=options['svg'], pure_heat=options['pure_heat'])
        self.report_artifacts(storage, artifacts)
        self.stdout.write(self.style.SUCCESS(f"spectrum: {len(artifacts)} artifacts in {storage.location}"))
