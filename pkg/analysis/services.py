from concurrent.futures import ThreadPoolExecutor
import logging

import numpy as np
from django.conf import settings
from scipy import linalg, stats

from core.exceptions import InsufficientData, InvalidParameter
from discretization.models import StateField
from discretization.services import (
    CELLS_PER_HALF_SUPPORT,
    assemble_generator,
    build_grid,
    interface_jump,
    nonlocal_blocks,
    sample_function,
    weighted_mean,
    weighted_norm,
)
from energy.services import estimate_beta1
from evolution.models import Scheme
from evolution.services import evolve, make_scheme
from kernels.services import coupling_constants, make_kernel
from utils.utils import is_strictly_decreasing
from .models import BarrierSpec, DecayReport, SupersolutionReport, SweepRow

logger = logging.getLogger(__name__)

MIN_DECAY_SAMPLES = 20
MIN_FIT_SAMPLES = 5
DECAY_FLOOR = 1e-10
BOUND_SLACK = 1e-6


class HeatReference:
    """Neumann heat solution on (-1, 1) as a cosine series, sampled on w0's grid.

    Every mode has its discrete mean removed, so the reference carries
    exactly the mass of w0. Coefficients are the W-weighted least-squares
    projection of w0 onto the modes, and the t = 0 error never grows with
    n_modes. Modes above the grid's resolvable count are dropped.
    """

    def __init__(self, w0, n_modes=256):
        n_modes = int(n_modes)
        if n_modes < 1:
            raise InvalidParameter(f"heat reference needs at least one mode, got {n_modes}")
        grid = w0.grid
        self.grid = grid
        resolvable = max(1, int(2.0 / max(grid.h_local, grid.h_nonlocal)) - 1)
        if n_modes > resolvable:
            logger.debug("heat reference on %s capped at %d of %d modes", grid, resolvable, n_modes)
            n_modes = resolvable
        W = grid.weights
        n = np.arange(1, n_modes + 1)
        modes = np.cos(0.5 * np.pi * n[:, None] * (grid.positions[None, :] + 1.0))
        self.modes = modes - (modes @ W)[:, None] / grid.measure
        self.mean = weighted_mean(grid, w0)
        root = np.sqrt(W)
        self.coefficients = linalg.lstsq(
            (root[:, None] * self.modes.T), root * (w0.values - self.mean), lapack_driver='gelsd',
        )[0]
        self.rates = (0.5 * np.pi * n) ** 2

    def at(self, t):
        values = self.mean + (self.coefficients * np.exp(-self.rates * t)) @ self.modes
        return StateField(self.grid, values)


def heat_reference(w0, t, n_modes=256):
    return HeatReference(w0, n_modes).at(t)


def decay_report(trajectory, spectral):
    """Exponential rate of dist_to_mean and the check of the decay bound."""
    t = np.asarray(trajectory.times)
    dist = np.asarray(trajectory.column('dist_to_mean'))
    usable = dist >= 1e-12
    if int(usable.sum()) < MIN_DECAY_SAMPLES:
        raise InsufficientData(
            f"decay fit needs {MIN_DECAY_SAMPLES} samples with dist_to_mean >= 1e-12, got {int(usable.sum())}"
        )
    window = (dist >= DECAY_FLOOR) & (dist <= 0.5 * dist[0])
    if int(window.sum()) < MIN_FIT_SAMPLES:
        raise InsufficientData(f"only {int(window.sum())} samples in the decay fit window")

    fit = stats.linregress(t[window], np.log(dist[window]))
    envelope = dist[0] * np.exp(-spectral.beta1 * t) * (1.0 + BOUND_SLACK)
    bound_satisfied = bool(np.all(dist <= envelope + 1e-300))
    if not bound_satisfied:
        logger.warning("decay bound violated at t=%g", float(t[np.argmax(dist - envelope)]))
    return DecayReport(
        fitted_rate=float(-fit.slope),
        fit_window=(float(t[window][0]), float(t[window][-1])),
        r_squared=float(min(max(fit.rvalue**2, 0.0), 1.0)),
        beta1_used=spectral.beta1,
        lambda2=spectral.lambda2,
        bound_satisfied=bound_satisfied,
        samples_used=int(window.sum()),
    )


def sweep_member(plan, epsilon, horizon, initial):
    kernel = make_kernel(plan.family, plan.radius, epsilon)
    n_nonlocal = max(int(plan.n_nonlocal), int(np.ceil(CELLS_PER_HALF_SUPPORT / kernel.support - 1e-9)))
    grid = build_grid(plan.n_local, n_nonlocal)
    generator = assemble_generator(grid, kernel, coupling_constants(kernel, plan.c1, plan.c2))
    w0 = sample_function(grid, initial)
    trajectory = evolve(
        generator, w0, make_scheme(Scheme.IMPLICIT.value, dt=plan.dt), horizon, snapshot_stride=1,
    )
    reference = HeatReference(w0, plan.n_modes)
    sup_error = 0.0
    jump = 0.0
    for t, w in trajectory.snapshots:
        difference = w.with_values(w.values - reference.at(t).values)
        sup_error = max(sup_error, weighted_norm(grid, difference))
        jump = max(jump, interface_jump(w))
    beta1 = estimate_beta1(generator).beta1
    logger.info("sweep eps=%g n_nonlocal=%d sup_error=%.6g beta1=%.6g", epsilon, n_nonlocal, sup_error, beta1)
    return SweepRow(
        epsilon=float(epsilon),
        n_nonlocal=n_nonlocal,
        dt=trajectory.dt,
        sup_error=sup_error,
        beta1_eps=beta1,
        interface_jump=jump,
    )


def epsilon_sweep(plan, eps_list, horizon, initial, workers=None):
    """Distance to the heat reference for each epsilon, members run on a thread pool.

    initial is a function of position; it is sampled on each member's grid
    because n_nonlocal grows for small epsilon.
    """
    eps_list = [float(eps) for eps in eps_list]
    if not eps_list:
        raise InvalidParameter("epsilon sweep needs at least one epsilon")
    if any(eps <= 0 for eps in eps_list):
        raise InvalidParameter(f"epsilons must be positive, got {eps_list}")
    if not is_strictly_decreasing(eps_list):
        raise InvalidParameter(f"epsilons must be strictly decreasing, got {eps_list}")
    workers = workers or settings.SIMULATION_WORKERS
    with ThreadPoolExecutor(max_workers=max(1, min(int(workers), len(eps_list)))) as pool:
        futures = [pool.submit(sweep_member, plan, eps, horizon, initial) for eps in eps_list]
        return [future.result() for future in futures]


def make_barrier_spec(xi0=2.0, a=0.5, T=0.03):
    return BarrierSpec(xi0=float(xi0), a=float(a), T=float(T))


def barrier_fields(spec, grid, dt, sign=1):
    """Sample sign * w_bar on the local nodes for t in [0, T].

    The nonlocal companion is v_bar(y, t) = w_bar(0, t), which makes the
    discrete Robin flux vanish identically.
    """
    if sign not in (1, -1):
        raise InvalidParameter(f"barrier sign must be +1 or -1, got {sign}")
    steps = int(round(spec.T / dt))
    if steps < 2 or abs(steps * dt - spec.T) > 1e-9 * spec.T:
        raise InvalidParameter(f"dt={dt:.6g} must divide T={spec.T:.6g} into at least 2 steps")
    times = np.linspace(0.0, spec.T, steps + 1)
    u = sign * spec.value(grid.local_nodes[None, :], times[:, None])
    v = np.repeat(u[:, -1:], grid.n_nonlocal, axis=1)
    return times, u, v


def supersolution_check(u_field, v_field, times, grid, kernel, constants, tol,
                        sense='super', inequalities=(1, 2, 3, 4)):
    """Worst signed margin of each discrete supersolution inequality.

    (1) u_t >= local Laplacian at interior nodes
    (2) left boundary: (u_1 - u_0)/h - (h/2) u_t <= 0
    (3) interface: (u_N - u_{N-1})/h + (h/2) u_t >= Robin flux
    (4) v_t >= nonlocal row

    The boundary forms are the ghost-node rows of the generator, so a
    discrete solution satisfies every inequality with equality. Time
    derivatives are centered; sense='sub' reverses every inequality.
    """
    if sense not in ('super', 'sub'):
        raise InvalidParameter(f"sense must be 'super' or 'sub', got {sense}")
    u_field = np.asarray(u_field, dtype=float)
    v_field = np.asarray(v_field, dtype=float)
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise InvalidParameter(f"supersolution check needs at least 3 time samples, got {len(times)}")
    if u_field.shape != (len(times), grid.n_local + 1) or v_field.shape != (len(times), grid.n_nonlocal):
        raise InvalidParameter(f"fields do not match {grid} and {len(times)} time samples")
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise InvalidParameter("supersolution check needs a uniform time partition")
    dt = steps.mean()
    h = grid.h_local
    N = grid.interface_index

    u = u_field[1:-1]
    v = v_field[1:-1]
    u_t = (u_field[2:] - u_field[:-2]) / (2.0 * dt)
    v_t = (v_field[2:] - v_field[:-2]) / (2.0 * dt)
    sign = 1.0 if sense == 'super' else -1.0
    margins = {}

    if 1 in inequalities:
        laplacian = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / h**2
        margins[1] = sign * (u_t[:, 1:-1] - laplacian)
    if 2 in inequalities:
        margins[2] = -sign * ((u[:, 1] - u[:, 0]) / h - 0.5 * h * u_t[:, 0])
    if 3 in inequalities or 4 in inequalities:
        K, q = nonlocal_blocks(grid, kernel)
        h_nl = grid.h_nonlocal
        trace = u[:, N]
    if 3 in inequalities:
        flux = constants.c2 * ((v - trace[:, None]) * q).sum(axis=1) * h_nl
        margins[3] = sign * ((u[:, N] - u[:, N - 1]) / h + 0.5 * h * u_t[:, N] - flux)
    if 4 in inequalities:
        A = constants.c1 * h_nl * np.array(K)
        np.fill_diagonal(A, 0.0)
        rows = v @ A.T - A.sum(axis=1)[None, :] * v - constants.c2 * q[None, :] * (v - trace[:, None])
        margins[4] = sign * (v_t - rows)

    worst = {k: float(np.min(m)) for k, m in margins.items()}
    report = SupersolutionReport(sense=sense, tolerance=float(tol), margins=worst)
    logger.debug("%s-solution margins %s", sense, worst)
    return report
