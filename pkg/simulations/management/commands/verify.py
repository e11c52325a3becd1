import argparse

from django.core.management.base import CommandError

from core.decorators import exit_codes
from simulations.checks import run_checks
from simulations.exports import write_checks
from simulations.management.base import SimulationCommand

VERIFY_FAILED = 1


class Command(SimulationCommand):
    help = 'Run the verification suite and print a PASS/FAIL table; exit 1 if any check fails'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        # zeroes one interface coupling entry; the conservation check must catch it
        parser.add_argument('--corrupt-coupling', action='store_true', help=argparse.SUPPRESS)

    @exit_codes
    def handle(self, *args, **options):
        config, storage = self.load(options)
        results = run_checks(config, corrupt_coupling=options['corrupt_coupling'])
        width = max(len(result.name) for result in results)
        for result in results:
            style = self.style.SUCCESS if result.passed else self.style.ERROR
            self.stdout.write(f"{result.name:<{width}}  {style(result.status)}  {result.detail}")
        write_checks(storage, results)

        failed = [result.name for result in results if not result.passed]
        if failed:
            raise CommandError(f"verification failed: {', '.join(failed)}", returncode=VERIFY_FAILED)
        self.stdout.write(self.style.SUCCESS(f"verify: all {len(results)} checks passed"))
