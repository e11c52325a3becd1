import logging

import numpy as np
from scipy import linalg

from core.exceptions import ConvergenceFailure, InsufficientData, InvalidParameter
from discretization.models import StateField
from discretization.services import (
    MIN_CELLS,
    build_grid,
    check_resolution,
    nonlocal_blocks,
    pairwise_kernel,
    remove_mean,
    weighted_inner,
)
from kernels.services import coupling_constants, make_kernel
from utils.utils import make_rng
from .models import EnergyBreakdown, EnergyControlRow, PoincareReport, PoincareRow, SpectralReport

logger = logging.getLogger(__name__)

EIGEN_RESIDUAL_BOUND = 1e-8
DEGENERATE_ENERGY = 1e-14


def energy(grid, kernel, constants, w):
    """E(u, v) split into its local, nonlocal and interface terms."""
    if w.grid != grid:
        raise InvalidParameter(f"state lives on {w.grid}, expected {grid}")
    u = w.u
    local_term = 0.5 * float(np.sum(np.diff(u) ** 2)) / grid.h_local
    if not grid.is_coupled:
        return EnergyBreakdown(local_term, 0.0, 0.0)

    check_resolution(grid, kernel)
    K, q = nonlocal_blocks(grid, kernel)
    v = w.v
    h = grid.h_nonlocal
    jumps = v[None, :] - v[:, None]
    nonlocal_term = 0.25 * constants.c1 * float(np.sum(K * jumps**2)) * h**2
    coupling_term = 0.5 * constants.c2 * float(np.sum(q * (v - w.interface_value) ** 2)) * h
    return EnergyBreakdown(local_term, nonlocal_term, coupling_term)


def nonlocal_energy_full(grid, kernel, w):
    """Double quadrature of J^eps(x - y) (w(y) - w(x))^2 over (-1, 1)^2."""
    if w.grid != grid:
        raise InvalidParameter(f"state lives on {w.grid}, expected {grid}")
    check_resolution(grid, kernel)
    K = pairwise_kernel(grid, kernel)
    W = grid.weights
    jumps = w.values[None, :] - w.values[:, None]
    return float(W @ (K * jumps**2) @ W)


def estimate_beta1(generator):
    """Smallest nonzero eigenvalue of -L, solved as the pencil (-W L, W)."""
    grid = generator.grid
    W = grid.weights
    A = -W[:, None] * generator.dense()
    A = 0.5 * (A + A.T)
    try:
        values, vectors = linalg.eigh(A, np.diag(W), subset_by_index=[0, 1])
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigensolver failed for {grid}: {exc}") from exc

    if abs(values[0]) > 1e-8 * max(abs(values[1]), 1.0):
        logger.warning("constant mode of %s has eigenvalue %.3e, expected 0", grid, values[0])

    lambda2 = float(values[1])
    x = vectors[:, 1]
    # eigh normalises against W already; renormalise to absorb roundoff
    x = x / np.sqrt(np.dot(W, x * x))
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    Lx = generator.apply(StateField(grid, x)).values
    defect = -Lx - lambda2 * x
    residual = float(np.sqrt(np.dot(W, defect * defect)))
    if residual > EIGEN_RESIDUAL_BOUND * lambda2:
        logger.warning("eigen residual %.3e above bound for %s", residual, grid)
    else:
        logger.debug("eigen residual %.3e for %s", residual, grid)
    return SpectralReport(
        beta1=0.5 * lambda2,
        lambda2=lambda2,
        eigvec=StateField(grid, x),
        residual=residual,
        label=generator.label,
    )


def rayleigh(grid, kernel, constants, w):
    centered = remove_mean(grid, w)
    norm2 = weighted_inner(grid, centered, centered)
    scale = max(float(np.max(np.abs(w.values))), 1.0)
    if norm2 <= 1e-24 * scale**2:
        raise InvalidParameter("Rayleigh quotient of a constant state is undefined")
    return energy(grid, kernel, constants, w).total / norm2


def estimate_energy_control_k(grid, kernel, constants, n_samples, seed):
    """Smallest E(w) / nonlocal_energy_full(w) over random mean-zero states.

    Samples come sequentially from one seeded stream, so a longer run sees
    the shorter run's samples first.
    """
    n_samples = int(n_samples)
    if n_samples < 10:
        raise InvalidParameter(f"energy control needs at least 10 samples, got {n_samples}")
    rng = make_rng(seed)
    best = np.inf
    used = 0
    for _ in range(n_samples):
        w = remove_mean(grid, StateField(grid, rng.standard_normal(grid.size)))
        full = nonlocal_energy_full(grid, kernel, w)
        if full < DEGENERATE_ENERGY:
            continue
        used += 1
        best = min(best, energy(grid, kernel, constants, w).total / full)
    if not used:
        raise InsufficientData(f"all {n_samples} samples were degenerate on {grid}")
    logger.debug("energy control on %s: k=%.6g from %d samples", grid, best, used)
    return float(best)


def energy_control_sweep(family, radius, eps_list, n_samples, seed, cells_per_support=8):
    """Energy-control estimates on grids that refine with epsilon.

    Each grid keeps cells_per_support cells across eps * R in both
    subdomains, so white-noise samples stay equally rough at every scale.
    """
    rows = []
    for eps in eps_list:
        kernel = make_kernel(family, radius, eps)
        constants = coupling_constants(kernel)
        n = max(MIN_CELLS, int(np.ceil(cells_per_support / kernel.support - 1e-9)))
        grid = build_grid(n, n)
        k = estimate_energy_control_k(grid, kernel, constants, n_samples, seed)
        logger.info("energy control eps=%g grid=%s k=%.6g", eps, grid, k)
        rows.append(EnergyControlRow(float(eps), n, n, k))
    return rows


def poincare_check(grid, kernel_family, radius, eps_list, n_samples, seed):
    """Calibrate ||w - mean||^2 <= C * full nonlocal energy at eps = 1, then reuse C.

    The same random states are tested at every epsilon; a violation is a
    sample whose ratio exceeds the calibrated constant.
    """
    rng = make_rng(seed)
    samples = [remove_mean(grid, StateField(grid, rng.standard_normal(grid.size))) for _ in range(int(n_samples))]
    norms = np.array([weighted_inner(grid, w, w) for w in samples])

    def ratios(eps):
        kernel = make_kernel(kernel_family, radius, eps)
        return norms / np.array([nonlocal_energy_full(grid, kernel, w) for w in samples])

    constant = float(np.max(ratios(1.0)))
    rows = []
    for eps in eps_list:
        r = ratios(eps)
        violations = int(np.sum(r > constant * (1.0 + 1e-12)))
        if violations:
            logger.warning("Poincare bound violated by %d samples at eps=%g", violations, eps)
        rows.append(PoincareRow(float(eps), float(np.max(r)), violations))
    return PoincareReport(constant=constant, n_samples=int(n_samples), rows=rows)

