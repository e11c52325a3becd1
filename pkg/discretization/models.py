from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from django.db import models

from core.exceptions import InvalidParameter


class Domain(models.TextChoices):
    COUPLED = 'coupled', 'Local (-1,0) coupled to nonlocal (0,1)'
    HEAT = 'heat', 'Pure heat on (-1,1)'


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Grid:
    """Nodal points on [-1, 0] and cell centers on (0, 1).

    Degrees of freedom are ordered [u_0 .. u_{N_l}, v_0 .. v_{N_nl - 1}].
    The diagnostic heat domain puts all N_l + 1 nodes on [-1, 1] and has no
    nonlocal part.
    """
    n_local: int
    n_nonlocal: int
    domain: str = Domain.COUPLED.value

    @property
    def is_coupled(self):
        return self.domain == Domain.COUPLED

    @cached_property
    def h_local(self):
        length = 1.0 if self.is_coupled else 2.0
        return length / self.n_local

    @cached_property
    def h_nonlocal(self):
        return 1.0 / self.n_nonlocal if self.n_nonlocal else 0.0

    @cached_property
    def local_nodes(self):
        return _frozen(-1.0 + self.h_local * np.arange(self.n_local + 1))

    @cached_property
    def nonlocal_centers(self):
        return _frozen((np.arange(self.n_nonlocal) + 0.5) * self.h_nonlocal)

    @cached_property
    def positions(self):
        return _frozen(np.concatenate([self.local_nodes, self.nonlocal_centers]))

    @cached_property
    def weights(self):
        local = np.full(self.n_local + 1, self.h_local)
        local[0] *= 0.5
        local[-1] *= 0.5
        nonlocal_ = np.full(self.n_nonlocal, self.h_nonlocal)
        return _frozen(np.concatenate([local, nonlocal_]))

    @property
    def interface_index(self):
        return self.n_local

    @property
    def size(self):
        return self.n_local + 1 + self.n_nonlocal

    @property
    def local_slice(self):
        return slice(0, self.n_local + 1)

    @property
    def nonlocal_slice(self):
        return slice(self.n_local + 1, self.size)

    @property
    def measure(self):
        return 2.0

    def regions(self):
        return ['local'] * (self.n_local + 1) + ['nonlocal'] * self.n_nonlocal

    def __str__(self):
        if self.is_coupled:
            return f"grid({self.n_local}x{self.n_nonlocal})"
        return f"heat-grid({self.n_local})"


@dataclass(frozen=True, eq=False)
class StateField:
    """w = (u, v) sampled on a grid."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise InvalidParameter(
                f"state has shape {values.shape}, {self.grid} needs ({self.grid.size},)"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("state contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def u(self):
        return self.values[self.grid.local_slice]

    @property
    def v(self):
        return self.values[self.grid.nonlocal_slice]

    @property
    def interface_value(self):
        return self.values[self.grid.interface_index]

    def with_values(self, values):
        return StateField(self.grid, values)

    def __len__(self):
        return self.grid.size


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Sparse L with w' = L w; W L is symmetric, rows sum to zero."""
    grid: Grid
    matrix: sp.csr_matrix
    constants: object = None
    kernel: object = None
    label: str = field(default='coupled')

    @property
    def size(self):
        return self.grid.size

    @cached_property
    def diagonal(self):
        return _frozen(self.matrix.diagonal().copy())

    def apply(self, w):
        if w.grid != self.grid:
            raise InvalidParameter(f"state lives on {w.grid}, generator on {self.grid}")
        return StateField(self.grid, self.matrix @ w.values)

    def dense(self):
        return self.matrix.toarray()

    def blocks(self):
        """(L_uu, L_uv, L_vu, L_vv) split along the local/nonlocal boundary."""
        n = self.grid.n_local + 1
        L = self.matrix
        return (
            L[:n, :n].tocsc(),
            L[:n, n:].tocsr(),
            L[n:, :n].tocsr(),
            L[n:, n:].tocsc(),
        )

    def with_entry_zeroed(self, row, col):
        """Copy with one entry removed; only used to check that the verification harness catches it."""
        corrupted = self.matrix.tolil(copy=True)
        corrupted[row, col] = 0.0
        return GeneratorMatrix(self.grid, corrupted.tocsr(), self.constants, self.kernel, f"{self.label}-corrupted")


@dataclass(frozen=True)
class StructureReport:
    row_sum_defect: float
    symmetry_defect: float
    min_off_diagonal: float
    max_diagonal: float
    constant_residual: float

    def passes(self, tol=1e-12):
        return (
            self.row_sum_defect <= tol
            and self.symmetry_defect <= tol
            and self.min_off_diagonal >= 0.0
            and self.max_diagonal <= 0.0
            and self.constant_residual <= tol
        )
