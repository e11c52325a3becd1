from core.decorators import exit_codes
from simulations.management.base import SimulationCommand
from simulations.services import run_simulate


class Command(SimulationCommand):
    help = 'Evolve the configured initial state and write the time series, snapshots and manifest'

    @exit_codes
    def handle(self, *args, **options):
        config, storage = self.load(options)
        artifacts = run_simulate(config, storage, svg=options['svg'])
        self.report_artifacts(storage, artifacts)
        self.stdout.write(self.style.SUCCESS(f"simulate: {len(artifacts)} artifacts in {storage.location}"))
