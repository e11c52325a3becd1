from dataclasses import dataclass

from django.db import models


class InitKind(models.TextChoices):
    CONSTANT = 'constant', 'Constant'
    STEP = 'step', 'Step (u = left, v = right)'
    COSINE = 'cosine', 'Cosine mode'
    GAUSSIAN = 'gaussian', 'Gaussian bump'
    FILE = 'file', 'Snapshot CSV'


@dataclass(frozen=True)
class SimConfig:
    """Validated run configuration.

    Field names are the dotted config keys with '.' replaced by '_'.
    time_dt and picard_window hold either a float or 'auto'.
    """
    kernel_family: str
    kernel_radius: float
    kernel_epsilon: float
    grid_n_local: int
    grid_n_nonlocal: int
    time_scheme: str
    time_dt: object
    time_horizon: float
    time_snapshot_stride: int
    picard_window: object
    picard_tol: float
    picard_max_iters: int
    picard_substeps: int
    init_kind: str
    init_value: float
    init_left: float
    init_right: float
    init_mode: int
    init_amplitude: float
    init_center: float
    init_width: float
    init_path: str
    output_dir: str
    seed: int
    spectrum_n_samples: int
    analysis_n_modes: int


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ''

    @property
    def status(self):
        return 'PASS' if self.passed else 'FAIL'
