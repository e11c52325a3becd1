from dataclasses import dataclass, field


@dataclass(frozen=True)
class EnergyBreakdown:
    local_term: float
    nonlocal_term: float
    coupling_term: float

    @property
    def total(self):
        return self.local_term + self.nonlocal_term + self.coupling_term

    def as_dict(self):
        return {
            'local': self.local_term,
            'nonlocal': self.nonlocal_term,
            'coupling': self.coupling_term,
            'total': self.total,
        }


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Spectral gap of -L in the W inner product.

    lambda2 is the smallest nonzero eigenvalue, beta1 = lambda2 / 2 the
    best constant in E(w) >= beta1 * ||w - mean||^2.
    """
    beta1: float
    lambda2: float
    eigvec: object
    residual: float
    label: str = 'coupled'


@dataclass(frozen=True)
class EnergyControlRow:
    epsilon: float
    n_local: int
    n_nonlocal: int
    k_estimate: float


@dataclass(frozen=True)
class PoincareRow:
    epsilon: float
    worst_ratio: float
    violations: int


@dataclass(frozen=True)
class PoincareReport:
    constant: float
    n_samples: int
    rows: list = field(default_factory=list)

    @property
    def violations(self):
        return sum(row.violations for row in self.rows)
