import numpy as np
from django.test import SimpleTestCase

from core.exceptions import CflViolation, InvalidParameter, NonFiniteState
from discretization.models import StateField
from discretization.services import (
    assemble_generator,
    assemble_heat_generator,
    build_grid,
    build_heat_grid,
    constant_field,
    mass,
    sample_function,
    weighted_norm,
)
from energy.services import energy
from kernels.services import coupling_constants, make_kernel
from .models import Scheme
from .services import (
    cfl_limit,
    evolve,
    exact_evolution,
    make_scheme,
    mass_flux,
    picard_contraction_factor,
    picard_window_solve,
    resolve_dt,
    step_explicit,
    step_implicit,
    time_levels,
)


def generator_for(n_local, n_nonlocal, family='triangle', eps=1.0):
    kernel = make_kernel(family, 1.0, eps)
    return assemble_generator(build_grid(n_local, n_nonlocal), kernel, coupling_constants(kernel))


def step_profile(grid):
    return sample_function(grid, lambda x: np.where(x <= 0, 1.0, 0.0))


def gaussian(grid, amplitude=0.5, center=-0.5, width=0.1):
    return sample_function(grid, lambda x: amplitude * np.exp(-(((x - center) / width) ** 2)))


def l2_distance(grid, a, b):
    return weighted_norm(grid, a.with_values(a.values - b.values))


class CflTests(SimpleTestCase):
    def test_pure_heat_limit(self):
        generator = assemble_heat_generator(build_heat_grid(200))
        self.assertAlmostEqual(cfl_limit(generator), 4.5e-5, delta=1e-15)

    def test_limit_shrinks_with_epsilon(self):
        limits = [cfl_limit(generator_for(40, 40, 'triangle', eps)) for eps in (1.0, 0.5, 0.25)]
        self.assertGreater(limits[0], limits[1])
        self.assertGreater(limits[1], limits[2])

    def test_explicit_at_limit_is_a_max_norm_contraction(self):
        L = generator_for(10, 10)
        dt = cfl_limit(L)
        w = StateField(L.grid, np.random.default_rng(0).standard_normal(L.grid.size))
        peak = np.abs(w.values).max()
        for _ in range(10_000):
            w = step_explicit(L, w, dt)
            current = np.abs(w.values).max()
            self.assertLessEqual(current, peak + 1e-14)
            peak = current

    def test_explicit_above_limit_is_rejected(self):
        L = generator_for(10, 10)
        with self.assertRaises(CflViolation):
            step_explicit(L, constant_field(L.grid, 1.0), 2.0 * cfl_limit(L))
        with self.assertRaises(CflViolation):
            resolve_dt(make_scheme(Scheme.EXPLICIT.value, dt=2.0 * cfl_limit(L)), L)


class SingleStepTests(SimpleTestCase):
    def test_constants_are_fixed_points(self):
        L = generator_for(20, 20)
        w = constant_field(L.grid, 3.0)
        np.testing.assert_allclose(step_explicit(L, w, cfl_limit(L)).values, 3.0, rtol=1e-14)
        np.testing.assert_allclose(step_implicit(L, w, 0.5).values, 3.0, rtol=1e-12)

    def test_mass_is_conserved(self):
        L = generator_for(20, 30, 'epanechnikov', 0.5)
        w = StateField(L.grid, np.random.default_rng(1).uniform(0.5, 1.5, L.grid.size))
        m0 = mass(L.grid, w)
        self.assertLessEqual(abs(mass(L.grid, step_explicit(L, w, cfl_limit(L))) - m0), 1e-13 * abs(m0))
        self.assertLessEqual(abs(mass(L.grid, step_implicit(L, w, 1e-2)) - m0), 1e-12 * abs(m0))

    def test_explicit_step_is_monotone(self):
        L = generator_for(20, 20)
        rng = np.random.default_rng(2)
        lo = rng.standard_normal(L.grid.size)
        hi = lo + rng.uniform(0.0, 1.0, L.grid.size)
        dt = cfl_limit(L)
        a = step_explicit(L, StateField(L.grid, hi), dt).values
        b = step_explicit(L, StateField(L.grid, lo), dt).values
        self.assertGreaterEqual((a - b).min(), -1e-14)

    def test_implicit_step_dissipates_energy(self):
        L = generator_for(20, 20, 'uniform', 0.5)
        rng = np.random.default_rng(3)
        for _ in range(10):
            w = StateField(L.grid, rng.standard_normal(L.grid.size))
            before = energy(L.grid, L.kernel, L.constants, w).total
            after = energy(L.grid, L.kernel, L.constants, step_implicit(L, w, 1e-3)).total
            self.assertLessEqual(after, before)

    def test_implicit_residual_is_relative_to_the_state(self):
        L = generator_for(200, 200)
        w = StateField(L.grid, np.random.default_rng(4).standard_normal(L.grid.size))
        x = step_implicit(L, w, 1e-3).values
        residual = w.values - (x - 1e-3 * (L.matrix @ x))
        self.assertLessEqual(np.abs(residual).max(), 1e-12 * np.abs(w.values).max())

    def test_non_positive_dt(self):
        L = generator_for(10, 10)
        with self.assertRaises(InvalidParameter):
            step_implicit(L, constant_field(L.grid, 1.0), 0.0)


class EvolveTests(SimpleTestCase):
    def test_time_levels_land_on_horizon(self):
        times = time_levels(1.0, 0.3)
        np.testing.assert_allclose(times, [0.0, 0.3, 0.6, 0.9, 1.0])
        self.assertEqual(len(time_levels(0.5, 0.5 / 512)), 513)

    def test_constant_start_stays_at_mean(self):
        L = generator_for(20, 20)
        trajectory = evolve(L, constant_field(L.grid, 2.0), make_scheme(), horizon=0.1)
        self.assertTrue(all(d < 1e-12 for d in trajectory.column('dist_to_mean')))

    def test_series_bookkeeping(self):
        L = generator_for(20, 20)
        trajectory = evolve(L, step_profile(L.grid), make_scheme(dt=0.01), horizon=0.105, snapshot_stride=4)
        self.assertEqual(len(trajectory.series), trajectory.steps + 1)
        self.assertEqual(trajectory.steps, 11)
        self.assertTrue(np.all(np.diff(trajectory.times) > 0))
        self.assertAlmostEqual(trajectory.times[-1], 0.105)
        self.assertEqual([t for t, _ in trajectory.snapshots][-1], trajectory.times[-1])
        self.assertEqual(len(trajectory.snapshots), 4)

    def test_implicit_run_conserves_mass_and_dissipates(self):
        L = generator_for(40, 40)
        trajectory = evolve(L, step_profile(L.grid), make_scheme(dt=1e-2), horizon=10.0)
        masses = np.array(trajectory.column('mass'))
        self.assertLessEqual(np.abs(masses - masses[0]).max(), 1e-11 * abs(masses[0]) + 1e-13)
        energies = np.array(trajectory.column('energy_total'))
        self.assertLessEqual(np.diff(energies).max(), 1e-12)
        distances = np.array(trajectory.column('dist_to_mean'))
        self.assertLessEqual(np.diff(distances).max(), 1e-12)

    def test_long_implicit_run_keeps_mass(self):
        L = generator_for(200, 200)
        grid = L.grid
        w0 = StateField(grid, np.concatenate([np.ones(grid.n_local + 1), np.zeros(grid.n_nonlocal)]))
        trajectory = evolve(L, w0, make_scheme(dt=1e-3), horizon=10.0)
        self.assertEqual(trajectory.steps, 10_000)
        masses = np.array(trajectory.column('mass'))
        self.assertLessEqual(np.abs(masses - masses[0]).max() / abs(masses[0]), 1e-11)

    def test_broken_coupling_still_changes_mass(self):
        L = generator_for(40, 40)
        N = L.grid.interface_index
        broken = L.with_entry_zeroed(N, N + 1)
        self.assertFalse(np.all(mass_flux(broken) == 0.0))
        self.assertTrue(np.all(mass_flux(L) == 0.0))
        masses = evolve(broken, step_profile(L.grid), make_scheme(dt=1e-2), horizon=1.0).column('mass')
        self.assertGreater(abs(masses[-1] - masses[0]), 1e-6)

    def test_nonnegative_data_stay_nonnegative(self):
        L = generator_for(40, 40)
        schemes = (
            make_scheme(Scheme.EXPLICIT.value, dt=cfl_limit(L)),
            make_scheme(Scheme.IMPLICIT.value, dt=1e-2),
        )
        for w0 in (step_profile(L.grid), gaussian(L.grid)):
            for scheme in schemes:
                trajectory = evolve(L, w0, scheme, horizon=0.2, snapshot_stride=1)
                lowest = min(w.values.min() for _, w in trajectory.snapshots)
                self.assertGreaterEqual(lowest, -1e-14, msg=scheme.kind)

    def test_comparison_principle(self):
        L = generator_for(20, 20)
        scheme = make_scheme(dt=1e-2)
        rng = np.random.default_rng(50)
        for _ in range(50):
            lo = rng.standard_normal(L.grid.size)
            hi = lo + rng.uniform(0.0, 1.0, L.grid.size)
            a = evolve(L, StateField(L.grid, hi), scheme, horizon=0.1, snapshot_stride=1)
            b = evolve(L, StateField(L.grid, lo), scheme, horizon=0.1, snapshot_stride=1)
            for (_, wa), (_, wb) in zip(a.snapshots, b.snapshots):
                self.assertGreaterEqual((wa.values - wb.values).min(), -1e-12)

    def test_explicit_and_implicit_agree_to_first_order(self):
        L = generator_for(20, 20)
        w0 = gaussian(L.grid, amplitude=1.0, width=0.3)
        dt = 0.1 / np.ceil(0.1 / cfl_limit(L))
        gaps = []
        for step in (dt, dt / 2):
            explicit = evolve(L, w0, make_scheme(Scheme.EXPLICIT.value, dt=step), horizon=0.1).final
            implicit = evolve(L, w0, make_scheme(Scheme.IMPLICIT.value, dt=step), horizon=0.1).final
            gaps.append(l2_distance(L.grid, explicit, implicit))
        self.assertTrue(1.5 <= gaps[0] / gaps[1] <= 2.5, msg=f"gaps {gaps}")

    def test_matches_the_exact_semigroup(self):
        L = generator_for(20, 20)
        w0 = gaussian(L.grid)
        numeric = evolve(L, w0, make_scheme(dt=1e-4), horizon=0.5).final
        self.assertLessEqual(l2_distance(L.grid, numeric, exact_evolution(L, w0, 0.5)), 1e-5)

    def test_exact_semigroup_keeps_mass(self):
        L = generator_for(20, 20)
        w0 = gaussian(L.grid)
        self.assertAlmostEqual(mass(L.grid, exact_evolution(L, w0, 3.0)), mass(L.grid, w0), delta=1e-12)

    def test_blow_up_is_reported(self):
        L = generator_for(10, 10)
        huge = StateField(L.grid, np.full(L.grid.size, 1e308) * np.where(np.arange(L.grid.size) % 2, 1, -1))
        with self.assertRaises(NonFiniteState):
            evolve(L, huge, make_scheme(Scheme.EXPLICIT.value), horizon=1e-3)


class PicardTests(SimpleTestCase):
    def test_contraction_factor(self):
        constants = coupling_constants(make_kernel('triangle'))
        window = 0.8 / (2 * constants.c1 + constants.c2)
        self.assertAlmostEqual(picard_contraction_factor(constants, window), 0.5 * window / 0.2)
        with self.assertRaises(InvalidParameter):
            picard_contraction_factor(constants, 1.0 / (2 * constants.c1 + constants.c2))

    def test_constant_start_converges_immediately(self):
        L = generator_for(20, 20)
        trajectory, report = picard_window_solve(
            L, constant_field(L.grid, 1.5), make_scheme(Scheme.PICARD.value), horizon=0.1,
        )
        self.assertTrue(all(n == 1 for n in report.iterations))
        np.testing.assert_allclose(trajectory.final.values, 1.5, rtol=1e-12)

    def test_matches_monolithic_implicit_euler(self):
        L = generator_for(100, 100)
        window = 0.5 / 16
        scheme = make_scheme(Scheme.PICARD.value, window=window, tolerance=1e-10)
        trajectory, report = picard_window_solve(L, step_profile(L.grid), scheme, horizon=0.5)
        monolithic = evolve(L, step_profile(L.grid), make_scheme(dt=window / 32), horizon=0.5)
        self.assertEqual(report.windows, 16)
        self.assertTrue(report.converged)
        self.assertLess(report.kappa, 1.0)
        self.assertLessEqual(report.max_ratio, report.kappa)
        self.assertEqual(trajectory.times, monolithic.times)
        self.assertLessEqual(l2_distance(L.grid, trajectory.final, monolithic.final), 1e-6)

    def test_window_above_bound_is_rejected(self):
        L = generator_for(20, 20)
        scheme = make_scheme(Scheme.PICARD.value, window=1.0)
        with self.assertRaises(InvalidParameter):
            evolve(L, constant_field(L.grid, 1.0), scheme, horizon=0.1)

    def test_picard_conserves_mass(self):
        L = generator_for(30, 30)
        w0 = gaussian(L.grid)
        trajectory = evolve(L, w0, make_scheme(Scheme.PICARD.value, tolerance=1e-12), horizon=0.2)
        masses = np.array(trajectory.column('mass'))
        self.assertLessEqual(np.abs(masses - masses[0]).max(), 1e-10 * abs(masses[0]))
