from dataclasses import dataclass, field

from django.db import models

AUTO = 'auto'


class Scheme(models.TextChoices):
    EXPLICIT = 'explicit', 'Explicit Euler'
    IMPLICIT = 'implicit', 'Implicit Euler'
    PICARD = 'picard', 'Picard window iteration'


@dataclass(frozen=True)
class StepScheme:
    """Time integrator and its parameters.

    dt and window may be 'auto'; they are resolved against the generator
    before the first step.
    """
    kind: str = Scheme.IMPLICIT.value
    dt: object = AUTO
    window: object = AUTO
    tolerance: float = 1e-10
    max_iterations: int = 50
    substeps: int = 32

    @property
    def is_picard(self):
        return self.kind == Scheme.PICARD


SERIES_COLUMNS = (
    't', 'mass', 'energy_total', 'energy_local', 'energy_nonlocal', 'energy_coupling', 'dist_to_mean',
)


@dataclass(frozen=True)
class SeriesRecord:
    t: float
    mass: float
    energy_total: float
    energy_local: float
    energy_nonlocal: float
    energy_coupling: float
    dist_to_mean: float

    def as_row(self):
        return [getattr(self, name) for name in SERIES_COLUMNS]


@dataclass(frozen=True)
class PicardReport:
    windows: int
    iterations: list
    final_norms: list
    kappa: float
    # largest ratio of successive update norms seen in any window
    max_ratio: float = 0.0
    tolerance: float = 0.0

    @property
    def converged(self):
        return all(norm <= self.tolerance for norm in self.final_norms)


@dataclass(eq=False)
class Trajectory:
    grid: object
    dt: float
    scheme: str
    times: list = field(default_factory=list)
    series: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: object = None
    picard: PicardReport = None

    @property
    def steps(self):
        return len(self.series) - 1

    def column(self, name):
        return [getattr(record, name) for record in self.series]
