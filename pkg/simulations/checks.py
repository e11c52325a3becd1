"""Verification suite behind the ``verify`` command.

Each check returns a CheckResult; a runtime failure inside a check is a
FAIL of that check, while invalid parameters abort the whole run.
"""
import logging

import numpy as np

from analysis.services import barrier_fields, decay_report, make_barrier_spec, supersolution_check
from core.decorators import one_line
from core.exceptions import SimulationError
from discretization.models import StateField
from discretization.services import (
    assemble_generator,
    assemble_heat_generator,
    build_grid,
    build_heat_grid,
    operator_structure,
    required_nonlocal_cells,
    sample_function,
    weighted_norm,
)
from energy.services import energy_control_sweep, estimate_beta1
from evolution.models import Scheme
from evolution.services import cfl_limit, evolve, exact_evolution, make_scheme, picard_window_solve
from kernels.models import KernelFamily
from kernels.services import coupling_constants, make_kernel
from utils.utils import make_rng
from .models import CheckResult
from .services import build_generator, build_kernel, implicit_dt

logger = logging.getLogger(__name__)

STRUCTURE_EPSILONS = (1.0, 0.25)
STRUCTURE_DT = 1e-3
MASS_TOLERANCE = 1e-11
ENERGY_TOLERANCE = 1e-12
COMPARISON_PAIRS = 50
COMPARISON_HORIZON = 0.05
ORDER_TOLERANCE = 1e-12
DECAY_RATE_RANGE = (1.9, 2.1)
PICARD_WINDOWS = 5
PICARD_ORACLE_TOLERANCE = 1e-6
SEMIGROUP_TIME = 0.5
SEMIGROUP_DT = 1e-4
SEMIGROUP_TOLERANCE = 1e-5
HEAT_CELLS = 400
HEAT_TOLERANCE = 0.02
ENERGY_CONTROL_EPSILONS = (1.0, 0.5, 0.25)


def bump(amplitude=1.0, center=-0.5, width=0.1):
    return lambda x: amplitude * np.exp(-(((x - center) / width) ** 2))


def small_generator(config, n):
    kernel = build_kernel(config)
    n = max(n, required_nonlocal_cells(kernel))
    return assemble_generator(build_grid(n, n), kernel, coupling_constants(kernel))


def check_operator_structure(config):
    worst = {'row_sum': 0.0, 'symmetry': 0.0, 'inverse_min': np.inf}
    failures = []
    for family in KernelFamily.values:
        for eps in STRUCTURE_EPSILONS:
            kernel = make_kernel(family, config.kernel_radius, eps)
            n = max(40, required_nonlocal_cells(kernel))
            generator = assemble_generator(build_grid(n, n), kernel, coupling_constants(kernel))
            report = operator_structure(generator)
            inverse = np.linalg.inv(np.eye(generator.size) - STRUCTURE_DT * generator.dense())
            worst['row_sum'] = max(worst['row_sum'], report.row_sum_defect)
            worst['symmetry'] = max(worst['symmetry'], report.symmetry_defect)
            worst['inverse_min'] = min(worst['inverse_min'], float(inverse.min()))
            if not report.passes() or inverse.min() < -ORDER_TOLERANCE:
                failures.append(str(kernel))
    detail = (f"row sums {worst['row_sum']:.2e}, W L asymmetry {worst['symmetry']:.2e}, "
              f"min (I - dt L)^-1 entry {worst['inverse_min']:.2e}")
    if failures:
        detail += f"; failing: {', '.join(failures)}"
    return [CheckResult('operator structure', not failures, detail)]


def check_conservation(config, corrupt_coupling=False):
    """Mass and energy along an implicit run from u = 1, v = 0."""
    generator = build_generator(config)
    grid = generator.grid
    if corrupt_coupling:
        N = grid.interface_index
        generator = generator.with_entry_zeroed(N, N + 1)
        logger.warning("generator corrupted at (%d, %d) for the harness self-test", N, N + 1)
    w0 = StateField(grid, np.concatenate([np.ones(grid.n_local + 1), np.zeros(grid.n_nonlocal)]))
    trajectory = evolve(generator, w0, make_scheme(Scheme.IMPLICIT.value, dt=implicit_dt(config)), config.time_horizon)

    masses = np.asarray(trajectory.column('mass'))
    drift = float(np.max(np.abs(masses - masses[0])) / abs(masses[0]))
    increase = float(np.max(np.diff(trajectory.column('energy_total'))))
    return [
        CheckResult('mass conservation', drift <= MASS_TOLERANCE, f"relative drift {drift:.3e}"),
        CheckResult('energy dissipation', increase <= ENERGY_TOLERANCE, f"largest step increase {increase:.3e}"),
    ]


def check_comparison(config):
    """Ordered pairs stay ordered under explicit-at-CFL and implicit stepping."""
    generator = small_generator(config, 20)
    grid = generator.grid
    rng = make_rng(config.seed)
    schemes = (
        make_scheme(Scheme.EXPLICIT.value, dt=cfl_limit(generator)),
        make_scheme(Scheme.IMPLICIT.value, dt=implicit_dt(config)),
    )
    worst = np.inf
    for _ in range(COMPARISON_PAIRS):
        lo = rng.standard_normal(grid.size)
        hi = lo + rng.uniform(0.0, 1.0, grid.size)
        for scheme in schemes:
            a = evolve(generator, StateField(grid, hi), scheme, COMPARISON_HORIZON, snapshot_stride=1)
            b = evolve(generator, StateField(grid, lo), scheme, COMPARISON_HORIZON, snapshot_stride=1)
            for (_, wa), (_, wb) in zip(a.snapshots, b.snapshots):
                worst = min(worst, float((wa.values - wb.values).min()))
    return [CheckResult('comparison principle', worst >= -ORDER_TOLERANCE, f"smallest gap {worst:.3e}")]


def check_spectral_gap(config):
    generator = build_generator(config)
    report = estimate_beta1(generator)
    passed = report.beta1 > 0.01 and report.residual <= 1e-8
    return [CheckResult('spectral gap', passed, f"beta1 {report.beta1:.6g}, residual {report.residual:.2e}")]


def check_decay(config):
    generator = build_generator(config)
    spectral = estimate_beta1(generator)
    w0 = sample_function(generator.grid, bump())
    scheme = make_scheme(Scheme.IMPLICIT.value, dt=implicit_dt(config))
    report = decay_report(evolve(generator, w0, scheme, config.time_horizon), spectral)
    low, high = DECAY_RATE_RANGE
    in_range = low * spectral.beta1 <= report.fitted_rate <= high * spectral.beta1
    return [
        CheckResult('decay bound', report.bound_satisfied, f"beta1 {spectral.beta1:.6g}"),
        CheckResult(
            'decay rate',
            in_range,
            f"fitted {report.fitted_rate:.6g} = {report.fitted_rate / spectral.beta1:.4f} beta1",
        ),
    ]


def check_picard(config):
    """Picard windows against the monolithic implicit solve with the same sub-step."""
    generator = small_generator(config, 100)
    w0 = sample_function(generator.grid, bump())
    scheme = make_scheme(
        Scheme.PICARD.value,
        tolerance=1e-10,
        max_iterations=config.picard_max_iters,
        substeps=config.picard_substeps,
    )
    window = 0.8 * generator.constants.picard_window_bound
    trajectory, report = picard_window_solve(generator, w0, scheme, PICARD_WINDOWS * window)
    oracle = evolve(generator, w0, make_scheme(Scheme.IMPLICIT.value, dt=trajectory.dt), PICARD_WINDOWS * window)
    gap = weighted_norm(generator.grid, trajectory.final.with_values(trajectory.final.values - oracle.final.values))
    contracts = report.kappa >= 1.0 or report.max_ratio <= report.kappa
    return [CheckResult(
        'picard vs implicit',
        report.converged and gap <= PICARD_ORACLE_TOLERANCE and contracts,
        f"{report.windows} windows, gap {gap:.2e}, ratio {report.max_ratio:.3g} <= kappa {report.kappa:.3g}",
    )]


def check_semigroup(config):
    generator = small_generator(config, 20)
    w0 = sample_function(generator.grid, bump(amplitude=0.5))
    numeric = evolve(generator, w0, make_scheme(Scheme.IMPLICIT.value, dt=SEMIGROUP_DT), SEMIGROUP_TIME).final
    exact = exact_evolution(generator, w0, SEMIGROUP_TIME)
    gap = weighted_norm(generator.grid, numeric.with_values(numeric.values - exact.values))
    return [CheckResult('matrix exponential oracle', gap <= SEMIGROUP_TOLERANCE, f"L2 gap {gap:.2e}")]


def check_heat_eigenvalue(config):
    report = estimate_beta1(assemble_heat_generator(build_heat_grid(HEAT_CELLS)))
    expected = np.pi**2 / 8.0
    error = abs(report.beta1 - expected) / expected
    return [CheckResult('heat eigenvalue', error <= HEAT_TOLERANCE, f"beta1 {report.beta1:.6g}, pi^2/8 off by {error:.2%}")]


def check_energy_control(config):
    rows = energy_control_sweep(
        config.kernel_family, config.kernel_radius, ENERGY_CONTROL_EPSILONS, config.spectrum_n_samples, config.seed,
    )
    estimates = [row.k_estimate for row in rows]
    passed = min(estimates) > 0 and min(estimates) >= 0.5 * estimates[0]
    return [CheckResult('energy control', passed, ', '.join(f"k({r.epsilon:g})={r.k_estimate:.4g}" for r in rows))]


def check_barrier(config):
    spec = make_barrier_spec()
    kernel = build_kernel(config)
    grid = build_grid(1000, max(16, required_nonlocal_cells(kernel)))
    times, u, v = barrier_fields(spec, grid, 1e-5)
    report = supersolution_check(u, v, times, grid, kernel, coupling_constants(kernel), 1e-6, inequalities=(1, 2, 3))
    detail = ', '.join(f"({k}) {m:.3g}" for k, m in sorted(report.margins.items()))
    return [CheckResult('barrier supersolution', report.passes, detail)]


def run_checks(config, corrupt_coupling=False):
    checks = [
        ('operator structure', check_operator_structure, {}),
        ('conservation', check_conservation, {'corrupt_coupling': corrupt_coupling}),
        ('comparison principle', check_comparison, {}),
        ('spectral gap', check_spectral_gap, {}),
        ('decay', check_decay, {}),
        ('picard vs implicit', check_picard, {}),
        ('matrix exponential oracle', check_semigroup, {}),
        ('heat eigenvalue', check_heat_eigenvalue, {}),
        ('energy control', check_energy_control, {}),
        ('barrier supersolution', check_barrier, {}),
    ]
    results = []
    for name, check, options in checks:
        logger.info("verify: %s", name)
        try:
            results.extend(check(config, **options))
        except SimulationError as exc:
            logger.warning("verify: %s raised %s", name, exc)
            results.append(CheckResult(name, False, one_line(exc)))
    return results
