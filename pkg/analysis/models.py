from dataclasses import dataclass, field

import numpy as np

from core.exceptions import InvalidParameter


@dataclass(frozen=True)
class DecayReport:
    fitted_rate: float
    fit_window: tuple
    r_squared: float
    beta1_used: float
    lambda2: float
    bound_satisfied: bool
    samples_used: int = 0

    def as_row(self):
        return [self.fitted_rate, self.beta1_used, self.lambda2, self.r_squared, self.bound_satisfied]


@dataclass(frozen=True)
class SweepPlan:
    """Everything an epsilon-sweep member needs besides epsilon itself."""
    family: str
    radius: float
    n_local: int
    n_nonlocal: int
    dt: float
    n_modes: int = 256
    c1: float = None
    c2: float = None


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    n_nonlocal: int
    dt: float
    sup_error: float
    beta1_eps: float
    interface_jump: float = 0.0

    def as_row(self):
        return [self.epsilon, self.n_nonlocal, self.dt, self.sup_error, self.beta1_eps]


@dataclass(frozen=True)
class BarrierSpec:
    """Self-similar barrier sqrt(T + t) * g(x / sqrt(T + t)) for the local half.

    g(eta) = f(a * eta) / a with the cubic profile f, which is 1 left of
    -xi0 and rises to f(0) = 1 + xi0 / 3 with f'(0) = 1.
    """
    xi0: float
    a: float
    T: float

    def __post_init__(self):
        if not self.xi0 > 1:
            raise InvalidParameter(f"barrier needs xi0 > 1, got {self.xi0}")
        if not 0 < self.a < 1:
            raise InvalidParameter(f"barrier needs 0 < a < 1, got {self.a}")
        if not 0 < self.T < self.a**2 / (2 * self.xi0**2):
            raise InvalidParameter(
                f"barrier needs 0 < T < a^2/(2 xi0^2) = {self.a**2 / (2 * self.xi0**2):.6g}, got {self.T}"
            )
        if self.a**2 * self.max_curvature > 0.5:
            raise InvalidParameter(f"barrier needs a <= sqrt(xi0)/2, got a={self.a}")

    @property
    def max_curvature(self):
        return 2.0 / self.xi0

    def profile(self, xi, derivative=0):
        xi = np.asarray(xi, dtype=float)
        s = np.maximum(xi + self.xi0, 0.0)
        x02 = self.xi0**2
        if derivative == 0:
            return 1.0 + s**3 / (3.0 * x02)
        if derivative == 1:
            return s**2 / x02
        if derivative == 2:
            return 2.0 * s / x02
        raise InvalidParameter(f"profile derivative {derivative} not available")

    def g(self, eta, derivative=0):
        # d^k/d eta^k of f(a eta)/a = a^(k-1) f^(k)(a eta)
        return self.a ** (derivative - 1) * self.profile(self.a * np.asarray(eta, dtype=float), derivative)

    def value(self, x, t):
        s = np.sqrt(self.T + t)
        return s * self.g(np.asarray(x) / s)


@dataclass(frozen=True)
class SupersolutionReport:
    sense: str
    tolerance: float
    margins: dict = field(default_factory=dict)

    @property
    def passed(self):
        return {k: m >= -self.tolerance for k, m in self.margins.items()}

    @property
    def passes(self):
        return all(self.passed.values())

    def failing(self):
        return sorted(k for k, ok in self.passed.items() if not ok)
