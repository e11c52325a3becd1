import csv
import logging
from pathlib import Path

import numpy as np
from django.conf import settings

from analysis.models import SweepPlan
from analysis.plots import decay_svg, spectrum_svg, sweep_svg
from analysis.services import decay_report, epsilon_sweep
from core.exceptions import InsufficientData, InvalidParameter
from core.storage import ArtifactStorage
from discretization.models import StateField
from discretization.services import (
    assemble_generator,
    assemble_heat_generator,
    build_grid,
    build_heat_grid,
    sample_function,
)
from energy.services import estimate_beta1, estimate_energy_control_k
from evolution.models import AUTO, Scheme
from evolution.services import IMPLICIT_DEFAULT_DT, evolve, make_scheme, resolve_dt, resolve_window
from kernels.services import coupling_constants, make_kernel
from .exports import (
    write_decay,
    write_manifest,
    write_snapshots,
    write_spectrum,
    write_svg,
    write_sweep,
    write_timeseries,
)
from .models import InitKind

logger = logging.getLogger(__name__)


def output_storage(config):
    location = Path(config.output_dir or settings.SIMULATION_OUTPUT_DIR).resolve()
    return ArtifactStorage(location=str(location))


def build_kernel(config):
    return make_kernel(config.kernel_family, config.kernel_radius, config.kernel_epsilon)


def build_generator(config, pure_heat=False):
    if pure_heat:
        return assemble_heat_generator(build_heat_grid(config.grid_n_local))
    kernel = build_kernel(config)
    grid = build_grid(config.grid_n_local, config.grid_n_nonlocal)
    return assemble_generator(grid, kernel, coupling_constants(kernel))


def build_scheme(config):
    return make_scheme(
        config.time_scheme,
        dt=config.time_dt,
        window=config.picard_window,
        tolerance=config.picard_tol,
        max_iterations=config.picard_max_iters,
        substeps=config.picard_substeps,
    )


def implicit_dt(config):
    """Step for the runs that are always implicit (sweep members, verification)."""
    if config.time_scheme == Scheme.IMPLICIT and config.time_dt != AUTO:
        return float(config.time_dt)
    return IMPLICIT_DEFAULT_DT


def initial_profile(config):
    """Initial data as a function of position; file data has none."""
    kind = config.init_kind
    if kind == InitKind.CONSTANT:
        return lambda x: np.full_like(x, config.init_value)
    if kind == InitKind.STEP:
        # the interface node x = 0 belongs to the local half
        return lambda x: np.where(x <= 0.0, config.init_left, config.init_right)
    if kind == InitKind.COSINE:
        return lambda x: config.init_amplitude * np.cos(0.5 * np.pi * config.init_mode * (x + 1.0))
    if kind == InitKind.GAUSSIAN:
        return lambda x: config.init_amplitude * np.exp(-(((x - config.init_center) / config.init_width) ** 2))
    raise InvalidParameter(f"init.kind = {kind} has no closed form; use it with simulate or spectrum only")


def read_initial_state(path, grid):
    """A snapshot CSV (x, w, region) laid out on exactly this grid."""
    try:
        with open(path, newline='', encoding='utf-8') as handle:
            rows = list(csv.DictReader(handle))
        x = np.array([float(row['x']) for row in rows])
        w = np.array([float(row['w']) for row in rows])
    except (OSError, KeyError, ValueError) as exc:
        raise InvalidParameter(f"init.path: cannot read snapshot '{path}': {exc}") from exc
    if len(w) != grid.size or not np.allclose(x, grid.positions, rtol=0.0, atol=1e-9):
        raise InvalidParameter(f"init.path: '{path}' has {len(w)} rows that do not match {grid}")
    if not np.all(np.isfinite(w)):
        raise InvalidParameter(f"init.path: '{path}' holds non-finite values")
    return StateField(grid, w)


def initial_state(config, grid):
    if config.init_kind == InitKind.FILE:
        return read_initial_state(config.init_path, grid)
    return sample_function(grid, initial_profile(config))


def resolved_parameters(config, generator, storage):
    scheme = build_scheme(config)
    resolved = {'time_dt': resolve_dt(scheme, generator), 'output_dir': storage.location}
    if generator.constants is not None:
        resolved['picard_window'] = resolve_window(scheme, generator.constants)
    return resolved


def run_simulate(config, storage, svg=False):
    """Evolve the configured state and write the series, snapshots, decay fit and manifest."""
    generator = build_generator(config)
    scheme = build_scheme(config)
    resolved = resolved_parameters(config, generator, storage)
    w0 = initial_state(config, generator.grid)
    logger.info("simulate %s %s scheme=%s dt=%.17g horizon=%g", generator.grid, generator.kernel,
                scheme.kind, resolved['time_dt'], config.time_horizon)

    trajectory = evolve(generator, w0, scheme, config.time_horizon, config.time_snapshot_stride)
    artifacts = [write_timeseries(storage, trajectory)]
    artifacts += write_snapshots(storage, trajectory)

    spectral = estimate_beta1(generator)
    try:
        report = decay_report(trajectory, spectral)
    except InsufficientData as exc:
        logger.warning("decay fit skipped: %s", exc)
    else:
        artifacts.append(write_decay(storage, report))
    if svg:
        artifacts.append(write_svg(storage, 'decay.svg', decay_svg(trajectory, spectral.beta1)))

    artifacts.append(write_manifest(storage, config, **resolved))
    return artifacts


def run_spectrum(config, storage, svg=False, pure_heat=False):
    generator = build_generator(config, pure_heat=pure_heat)
    grid = generator.grid
    report = estimate_beta1(generator)
    if pure_heat:
        row = [grid.n_local, 0, None, report.beta1, report.lambda2, report.residual, None]
    else:
        k = estimate_energy_control_k(
            grid, generator.kernel, generator.constants, config.spectrum_n_samples, config.seed,
        )
        row = [grid.n_local, grid.n_nonlocal, config.kernel_epsilon, report.beta1, report.lambda2, report.residual, k]
    logger.info("spectrum of %s: beta1=%.17g residual=%.3e", grid, report.beta1, report.residual)

    artifacts = [write_spectrum(storage, row)]
    if svg:
        artifacts.append(write_svg(storage, 'spectrum.svg', spectrum_svg(report)))
    resolved = {'output_dir': storage.location}
    if not pure_heat:
        resolved.update(resolved_parameters(config, generator, storage))
    artifacts.append(write_manifest(storage, config, **resolved))
    return artifacts


def run_sweep(config, eps_list, storage, svg=False):
    """Epsilon sweep against the heat reference; members are always implicit."""
    plan = SweepPlan(
        family=config.kernel_family,
        radius=config.kernel_radius,
        n_local=config.grid_n_local,
        n_nonlocal=config.grid_n_nonlocal,
        dt=implicit_dt(config),
        n_modes=config.analysis_n_modes,
    )
    rows = epsilon_sweep(plan, eps_list, config.time_horizon, initial_profile(config))
    artifacts = [write_sweep(storage, rows)]
    if svg:
        artifacts.append(write_svg(storage, 'sweep.svg', sweep_svg(rows)))
    artifacts.append(write_manifest(
        storage, config, time_scheme=Scheme.IMPLICIT.value, time_dt=plan.dt, output_dir=storage.location,
    ))
    return artifacts
