from functools import lru_cache
import logging

import numpy as np
import scipy.sparse as sp

from core.exceptions import InvalidParameter, ResolutionError
from kernels.services import coupling_profile
from .models import Domain, GeneratorMatrix, Grid, StateField, StructureReport

logger = logging.getLogger(__name__)

MIN_CELLS = 4
# at least 8 quadrature points across the kernel support
CELLS_PER_HALF_SUPPORT = 4


def build_grid(n_local, n_nonlocal):
    n_local, n_nonlocal = int(n_local), int(n_nonlocal)
    if n_local < MIN_CELLS or n_nonlocal < MIN_CELLS:
        raise InvalidParameter(
            f"grid needs at least {MIN_CELLS} cells per subdomain, got ({n_local}, {n_nonlocal})"
        )
    return Grid(n_local, n_nonlocal, Domain.COUPLED.value)


def build_heat_grid(n_cells):
    n_cells = int(n_cells)
    if n_cells < 2 * MIN_CELLS:
        raise InvalidParameter(f"heat grid needs at least {2 * MIN_CELLS} cells, got {n_cells}")
    return Grid(n_cells, 0, Domain.HEAT.value)


def required_nonlocal_cells(kernel):
    return int(np.ceil(CELLS_PER_HALF_SUPPORT / kernel.support - 1e-9))


def check_resolution(grid, kernel):
    limit = kernel.support / CELLS_PER_HALF_SUPPORT
    if grid.h_nonlocal > limit * (1.0 + 1e-12):
        raise ResolutionError(
            f"{grid} under-resolves {kernel}: h_nl={grid.h_nonlocal:.6g} > eps*R/4={limit:.6g} "
            f"(needs n_nonlocal >= {required_nonlocal_cells(kernel)})"
        )


@lru_cache(maxsize=16)
def nonlocal_blocks(grid, kernel):
    """Kernel matrix J^eps(y_j - y_k) on the nonlocal centers and q(y_j)."""
    y = grid.nonlocal_centers
    K = kernel(y[:, None] - y[None, :])
    q = coupling_profile(kernel, y)
    K.setflags(write=False)
    q.setflags(write=False)
    return K, q


@lru_cache(maxsize=8)
def pairwise_kernel(grid, kernel):
    """J^eps(x_a - x_b) over every pair of degrees of freedom."""
    x = grid.positions
    K = kernel(x[:, None] - x[None, :])
    K.setflags(write=False)
    return K


def _local_stencil(n_nodes, h):
    """3-point Laplacian with Neumann ghost rows at both ends."""
    main = np.full(n_nodes, -2.0 / h**2)
    upper = np.full(n_nodes - 1, 1.0 / h**2)
    lower = np.full(n_nodes - 1, 1.0 / h**2)
    upper[0] = 2.0 / h**2
    lower[-1] = 2.0 / h**2
    return sp.diags([lower, main, upper], [-1, 0, 1], format='coo')


def assemble_generator(grid, kernel, constants):
    """Generator of the coupled system: the negative W-gradient of the discrete energy.

    Local rows are the Neumann/Robin ghost-node Laplacian, nonlocal rows the
    convolution sum plus the exchange with the interface trace u_{N_l}.
    """
    if not grid.is_coupled:
        raise InvalidParameter(f"{grid} has no nonlocal part; use assemble_heat_generator")
    if not (constants.c1 > 0 and constants.c2 > 0):
        raise InvalidParameter(f"invalid coupling constants {constants}")
    check_resolution(grid, kernel)

    N = grid.interface_index
    h_l, h_nl = grid.h_local, grid.h_nonlocal
    c1, c2 = constants.c1, constants.c2
    K, q = nonlocal_blocks(grid, kernel)
    v_index = N + 1 + np.arange(grid.n_nonlocal)

    local = _local_stencil(N + 1, h_l)
    rows, cols, vals = [local.row], [local.col], [local.data]

    # Robin ghost at the interface: flux g = c2 * sum_j q_j (v_j - u_N) h_nl
    flux_weights = (2.0 / h_l) * c2 * q * h_nl
    rows += [np.full(grid.n_nonlocal, N), [N]]
    cols += [v_index, [N]]
    vals += [flux_weights, [-flux_weights.sum()]]

    # convolution part, j != k
    A = c1 * h_nl * np.array(K)
    np.fill_diagonal(A, 0.0)
    j, k = np.nonzero(A)
    rows.append(v_index[j])
    cols.append(v_index[k])
    vals.append(A[j, k])

    # exchange with the trace and the matching diagonal
    rows += [v_index, v_index]
    cols += [np.full(grid.n_nonlocal, N), v_index]
    vals += [c2 * q, -A.sum(axis=1) - c2 * q]

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    ).tocsr()
    matrix.eliminate_zeros()
    logger.debug("assembled %s for %s (nnz=%d)", grid, kernel, matrix.nnz)
    return GeneratorMatrix(grid, matrix, constants, kernel, 'coupled')


def assemble_heat_generator(grid):
    if grid.is_coupled:
        raise InvalidParameter(f"{grid} is a coupled grid; use assemble_generator")
    matrix = _local_stencil(grid.n_local + 1, grid.h_local).tocsr()
    return GeneratorMatrix(grid, matrix, None, None, 'heat')


def operator_structure(generator):
    L = generator.matrix
    W = generator.grid.weights
    dense = L.toarray()
    magnitude = np.abs(dense).sum(axis=1)
    row_sums = np.abs(dense.sum(axis=1)) / np.maximum(magnitude, 1.0)
    WL = W[:, None] * dense
    off = dense - np.diag(np.diag(dense))
    ones = np.ones(generator.size)
    return StructureReport(
        row_sum_defect=float(row_sums.max()),
        symmetry_defect=float(np.abs(WL - WL.T).max() / np.abs(WL).max()),
        min_off_diagonal=float(off.min()),
        max_diagonal=float(np.diag(dense).max()),
        constant_residual=float(np.abs(L @ ones).max() / np.abs(dense).max()),
    )


def _check_grid(grid, *fields):
    for w in fields:
        if w.grid != grid:
            raise InvalidParameter(f"state lives on {w.grid}, expected {grid}")


def mass(grid, w):
    _check_grid(grid, w)
    return float(np.dot(grid.weights, w.values))


def weighted_inner(grid, a, b):
    _check_grid(grid, a, b)
    return float(np.dot(grid.weights, a.values * b.values))


def weighted_norm(grid, w):
    return float(np.sqrt(weighted_inner(grid, w, w)))


def weighted_mean(grid, w):
    return mass(grid, w) / grid.measure


def remove_mean(grid, w):
    return w.with_values(w.values - weighted_mean(grid, w))


def distance_to_mean(grid, w):
    return weighted_norm(grid, remove_mean(grid, w))


def constant_field(grid, value):
    return StateField(grid, np.full(grid.size, float(value)))


def sample_function(grid, function):
    return StateField(grid, function(grid.positions))


def snapshot_rows(w):
    return zip(w.grid.positions, w.values, w.grid.regions())


def interface_jump(w):
    """|u(0-) - v(0+)| with v(0+) extrapolated linearly from the first two centers."""
    v = w.v
    if len(v) < 2:
        raise InvalidParameter("interface jump needs a nonlocal part")
    return float(abs(w.interface_value - (1.5 * v[0] - 0.5 * v[1])))
