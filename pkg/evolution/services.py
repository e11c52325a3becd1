import logging

import numpy as np
import scipy.sparse as sp
from scipy import linalg
from scipy.sparse.linalg import splu

from core.exceptions import (
    CflViolation,
    ConvergenceFailure,
    InvalidParameter,
    NonFiniteState,
    SolveError,
)
from discretization.models import StateField
from discretization.services import distance_to_mean, mass
from energy.services import energy
from .models import AUTO, PicardReport, Scheme, SeriesRecord, StepScheme, Trajectory

logger = logging.getLogger(__name__)

CFL_SAFETY = 0.9
IMPLICIT_DEFAULT_DT = 1e-3
PICARD_WINDOW_FRACTION = 0.8
SOLVE_TOLERANCE = 1e-12
REFINEMENT_STEPS = 2


def cfl_limit(generator):
    """0.9 / max|L_ii|: keeps I + dt L entrywise nonnegative."""
    largest = float(np.max(np.abs(generator.diagonal)))
    if largest == 0.0:
        raise InvalidParameter("generator is zero; no CFL limit")
    return CFL_SAFETY / largest


def step_explicit(generator, w, dt, limit=None):
    limit = cfl_limit(generator) if limit is None else limit
    if not 0 < dt <= limit * (1.0 + 1e-12):
        raise CflViolation(f"explicit dt={dt:.6g} outside (0, {limit:.6g}]")
    return w.with_values(w.values + dt * (generator.matrix @ w.values))


class ImplicitStepper:
    """Factorised I - dt L with residual-checked solves."""

    def __init__(self, matrix, dt):
        if not dt > 0:
            raise InvalidParameter(f"time step must be positive, got {dt}")
        self.dt = float(dt)
        n = matrix.shape[0]
        self.system = (sp.identity(n, format='csc') - self.dt * matrix).tocsc()
        self.lu = splu(self.system)

    def solve(self, rhs):
        x = self.lu.solve(rhs)
        bound = SOLVE_TOLERANCE * max(float(np.max(np.abs(rhs))), 1e-300)
        for _ in range(REFINEMENT_STEPS + 1):
            residual = rhs - self.system @ x
            if float(np.max(np.abs(residual))) <= bound:
                return x
            x = x + self.lu.solve(residual)
        raise SolveError(
            f"implicit solve residual {float(np.max(np.abs(rhs - self.system @ x))):.3e} above {bound:.3e}"
        )

    def step(self, w):
        return w.with_values(self.solve(w.values))


def step_implicit(generator, w, dt):
    return ImplicitStepper(generator.matrix, dt).step(w)


def picard_contraction_factor(constants, window):
    """Lipschitz bound of the window map, with C_2 = c2 / 2."""
    c1, c2 = constants.c1, constants.c2
    room = 1.0 - (2.0 * c1 + c2) * window
    if room <= 0:
        raise InvalidParameter(
            f"picard window {window:.6g} is not below 1/(2*c1 + c2) = {constants.picard_window_bound:.6g}"
        )
    return 0.5 * c2 * (c2 * window) / room


def resolve_window(scheme, constants):
    if scheme.window in (None, AUTO):
        return PICARD_WINDOW_FRACTION * constants.picard_window_bound
    window = float(scheme.window)
    if not 0 < window < constants.picard_window_bound:
        raise InvalidParameter(
            f"picard window {window:.6g} must lie in (0, {constants.picard_window_bound:.6g})"
        )
    return window


def resolve_dt(scheme, generator):
    """Numeric time step for the scheme; 'auto' picks the scheme's default."""
    if scheme.kind == Scheme.PICARD:
        window = resolve_window(scheme, generator.constants)
        if scheme.dt in (None, AUTO):
            return window / int(scheme.substeps)
        dt = float(scheme.dt)
        substeps = window / dt
        if not dt > 0 or abs(substeps - round(substeps)) > 1e-9 * substeps:
            raise InvalidParameter(f"picard sub-step dt={dt:.6g} must divide the window {window:.6g}")
        return dt
    if scheme.dt in (None, AUTO):
        return cfl_limit(generator) if scheme.kind == Scheme.EXPLICIT else IMPLICIT_DEFAULT_DT
    dt = float(scheme.dt)
    if not dt > 0:
        raise InvalidParameter(f"time step must be positive, got {dt}")
    if scheme.kind == Scheme.EXPLICIT:
        limit = cfl_limit(generator)
        if dt > limit * (1.0 + 1e-12):
            raise CflViolation(f"explicit dt={dt:.6g} exceeds the CFL limit {limit:.6g}")
    return dt


def time_levels(horizon, dt):
    """0, dt, 2 dt, ... with the last step shortened to land on the horizon."""
    if not horizon > 0:
        raise InvalidParameter(f"horizon must be positive, got {horizon}")
    n = max(1, int(np.ceil(horizon / dt - 1e-9)))
    times = np.minimum(np.arange(n + 1) * dt, horizon)
    times[-1] = horizon
    return times


def record(generator, t, w):
    grid = generator.grid
    e = energy(grid, generator.kernel, generator.constants, w)
    return SeriesRecord(
        t=float(t),
        mass=mass(grid, w),
        energy_total=e.total,
        energy_local=e.local_term,
        energy_nonlocal=e.nonlocal_term,
        energy_coupling=e.coupling_term,
        dist_to_mean=distance_to_mean(grid, w),
    )


def mass_flux(generator):
    """Row vector f with d/dt mass(w) = f . w; entries at roundoff level are zeroed.

    f vanishes for a conservative generator (W L symmetric and L 1 = 0).
    """
    W = generator.grid.weights
    columns = generator.matrix.tocsc()
    flux = columns.T @ W
    terms = np.diff(columns.indptr) + 1
    noise = 4.0 * terms * np.finfo(float).eps * (abs(columns).T @ W)
    return np.where(np.abs(flux) <= noise, 0.0, flux)


def _restore_mass(grid, values, target):
    # uniform shift; constants lie in the kernel of L
    return values + (target - float(np.dot(grid.weights, values))) / grid.measure


def _checked(grid, values, step, t):
    if not np.all(np.isfinite(values)):
        raise NonFiniteState(step, t)
    return StateField(grid, values)


def evolve(generator, w0, scheme, horizon, snapshot_stride=0):
    """Advance w' = L w to the horizon, recording the series at every step."""
    if w0.grid != generator.grid:
        raise InvalidParameter(f"initial state lives on {w0.grid}, generator on {generator.grid}")
    if scheme.kind not in Scheme.values:
        raise InvalidParameter(f"unknown time scheme '{scheme.kind}'")
    if scheme.is_picard:
        trajectory, _ = picard_window_solve(generator, w0, scheme, horizon, snapshot_stride)
        return trajectory

    dt = resolve_dt(scheme, generator)
    times = time_levels(horizon, dt)
    trajectory = Trajectory(grid=generator.grid, dt=dt, scheme=scheme.kind)
    logger.info("evolving %s with %s dt=%.6g to t=%g (%d steps)",
                generator.grid, scheme.kind, dt, horizon, len(times) - 1)

    steppers = {}
    w = w0
    target = mass(generator.grid, w0)
    flux = mass_flux(generator) if scheme.kind == Scheme.IMPLICIT else None
    _store(trajectory, generator, 0, times[0], w, snapshot_stride, final=False)
    for step in range(1, len(times)):
        h = float(times[step] - times[step - 1])
        if scheme.kind == Scheme.EXPLICIT:
            values = w.values + h * (generator.matrix @ w.values)
        else:
            key = round(h, 15)
            if key not in steppers:
                steppers[key] = ImplicitStepper(generator.matrix, h)
            values = steppers[key].solve(w.values)
            # implicit Euler changes the mass by exactly h f . w_new
            target += h * float(np.dot(flux, values))
            values = _restore_mass(generator.grid, values, target)
        w = _checked(generator.grid, values, step, times[step])
        _store(trajectory, generator, step, times[step], w, snapshot_stride, final=step == len(times) - 1)

    trajectory.final = w
    return trajectory


def _store(trajectory, generator, step, t, w, stride, final):
    trajectory.times.append(float(t))
    trajectory.series.append(record(generator, t, w))
    if stride and (step % stride == 0 or final):
        trajectory.snapshots.append((float(t), w))


def picard_window_solve(generator, w0, scheme, horizon, snapshot_stride=0):
    """Split solve: nonlocal and local halves exchange trace/flux histories per window.

    Inside a window the interface trace u_N(t_k) is frozen to solve the
    nonlocal rows, then the resulting v history drives the Robin flux of
    the local rows. This repeats until the window's u history stops moving
    in the sup-in-time, weighted L2-in-space norm. The fixed point is the
    monolithic implicit Euler solution with the same sub-step.
    """
    grid = generator.grid
    constants = generator.constants
    if not grid.is_coupled or constants is None:
        raise InvalidParameter("picard iteration needs the coupled generator")
    window = resolve_window(scheme, constants)
    dt = resolve_dt(scheme, generator)
    substeps = max(1, int(round(window / dt)))
    kappa = picard_contraction_factor(constants, window)
    if kappa >= 1.0:
        logger.warning("picard bound kappa=%.3g is not a contraction for window %.6g", kappa, window)

    times = time_levels(horizon, dt)
    L_uu, L_uv, L_vu, L_vv = generator.blocks()
    N = grid.interface_index
    trace_column = L_vu[:, N].toarray().ravel()
    W_u = grid.weights[grid.local_slice]
    local_factors, nonlocal_factors = {}, {}

    def factor(cache, block, h):
        key = round(h, 15)
        if key not in cache:
            cache[key] = ImplicitStepper(block, h)
        return cache[key]

    trajectory = Trajectory(grid=grid, dt=dt, scheme=scheme.kind)
    logger.info("picard on %s: window=%.6g substeps=%d kappa=%.3g horizon=%g",
                grid, window, substeps, kappa, horizon)

    u, v = np.array(w0.u), np.array(w0.v)
    _store(trajectory, generator, 0, times[0], w0, snapshot_stride, final=False)
    iterations, final_norms = [], []
    max_ratio = 0.0
    roundoff = 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(w0.values))))

    start = 0
    while start < len(times) - 1:
        stop = min(start + substeps, len(times) - 1)
        steps = np.diff(times[start:stop + 1])
        U = np.tile(u, (len(steps), 1))
        last_norm = np.inf
        previous = None
        for iteration in range(1, int(scheme.max_iterations) + 1):
            # nonlocal half with the trace history frozen
            V = np.empty((len(steps), len(v)))
            v_k = v
            for k, h in enumerate(steps):
                v_k = factor(nonlocal_factors, L_vv, h).solve(v_k + h * trace_column * U[k, N])
                V[k] = v_k
            # local half driven by the nonlocal history through the Robin flux
            U_new = np.empty_like(U)
            u_k = u
            for k, h in enumerate(steps):
                u_k = factor(local_factors, L_uu, h).solve(u_k + h * (L_uv @ V[k]))
                U_new[k] = u_k
            if not (np.all(np.isfinite(U_new)) and np.all(np.isfinite(V))):
                raise NonFiniteState(start, float(times[start]), "non-finite picard iterate")
            last_norm = float(np.max(np.sqrt((W_u * (U_new - U) ** 2).sum(axis=1))))
            if previous is not None and previous > roundoff:
                max_ratio = max(max_ratio, last_norm / previous)
            logger.debug("picard window at t=%.6g iteration %d: update %.3e", times[start], iteration, last_norm)
            previous = last_norm
            U = U_new
            if last_norm <= scheme.tolerance:
                break
        else:
            raise ConvergenceFailure(
                f"picard window at t={times[start]:.6g} did not converge in {scheme.max_iterations} "
                f"iterations (last update {last_norm:.3e}, kappa={kappa:.3g})",
                last_norm=last_norm,
                kappa=kappa,
            )
        iterations.append(iteration)
        final_norms.append(last_norm)
        for k in range(len(steps)):
            step = start + k + 1
            w = _checked(grid, np.concatenate([U[k], V[k]]), step, times[step])
            _store(trajectory, generator, step, times[step], w, snapshot_stride, final=step == len(times) - 1)
        u, v = U[-1], V[-1]
        start = stop

    report = PicardReport(
        windows=len(iterations),
        iterations=iterations,
        final_norms=final_norms,
        kappa=kappa,
        max_ratio=max_ratio,
        tolerance=float(scheme.tolerance),
    )
    logger.info("picard finished: %d windows, at most %d iterations, max contraction %.3g",
                report.windows, max(iterations), max_ratio)
    trajectory.final = StateField(grid, np.concatenate([u, v]))
    trajectory.picard = report
    return trajectory, report


def exact_evolution(generator, w0, t):
    """e^{tL} w0 through the dense W-symmetric eigendecomposition."""
    grid = generator.grid
    W = grid.weights
    A = -W[:, None] * generator.dense()
    values, vectors = linalg.eigh(0.5 * (A + A.T), np.diag(W))
    coefficients = vectors.T @ (W * w0.values)
    return StateField(grid, vectors @ (np.exp(-np.maximum(values, 0.0) * t) * coefficients))


def make_scheme(kind=Scheme.IMPLICIT.value, dt=AUTO, window=AUTO, tolerance=1e-10, max_iterations=50, substeps=32):
    if kind not in Scheme.values:
        raise InvalidParameter(f"unknown time scheme '{kind}' (expected one of {', '.join(Scheme.values)})")
    if dt not in (None, AUTO) and not float(dt) > 0:
        raise InvalidParameter(f"time step must be positive, got {dt}")
    if not tolerance > 0:
        raise InvalidParameter(f"picard tolerance must be positive, got {tolerance}")
    if int(max_iterations) < 1 or int(substeps) < 1:
        raise InvalidParameter("picard iteration and sub-step counts must be at least 1")
    return StepScheme(
        kind=str(kind),
        dt=dt,
        window=window,
        tolerance=float(tolerance),
        max_iterations=int(max_iterations),
        substeps=int(substeps),
    )
