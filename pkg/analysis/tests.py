import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InsufficientData, InvalidParameter
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
from energy.services import estimate_beta1
from evolution.services import evolve, exact_evolution, make_scheme
from kernels.services import coupling_constants, make_kernel
from .models import SweepPlan
from .plots import decay_svg, sweep_svg
from .services import (
    HeatReference,
    barrier_fields,
    decay_report,
    epsilon_sweep,
    heat_reference,
    make_barrier_spec,
    supersolution_check,
)


def first_mode(x):
    return np.cos(0.5 * np.pi * (x + 1.0))


def bump(x):
    return np.exp(-(((x + 0.5) / 0.2) ** 2))


def distance(grid, a, b):
    return weighted_norm(grid, a.with_values(a.values - b.values))


class HeatReferenceTests(SimpleTestCase):
    def test_single_mode_decays_exactly(self):
        grid = build_grid(200, 200)
        w0 = sample_function(grid, first_mode)
        expected = np.exp(-np.pi**2 / 4) * first_mode(grid.positions)
        np.testing.assert_allclose(heat_reference(w0, 1.0).values, expected, atol=1e-4)

    def test_mass_is_kept(self):
        grid = build_grid(50, 70)
        w0 = sample_function(grid, bump)
        for t in (0.0, 0.01, 0.3, 2.0):
            self.assertAlmostEqual(mass(grid, heat_reference(w0, t)), mass(grid, w0), delta=1e-8)

    def test_long_time_limit_is_the_mean(self):
        grid = build_grid(50, 50)
        w0 = sample_function(grid, bump)
        np.testing.assert_allclose(heat_reference(w0, 50.0).values, mass(grid, w0) / 2, atol=1e-12)

    def test_truncation_error_shrinks_with_modes(self):
        grid = build_grid(200, 200)
        w0 = sample_function(grid, lambda x: np.exp(-(((x + 0.5) / 0.1) ** 2)))
        errors = [distance(grid, HeatReference(w0, n).at(0.0), w0) for n in (16, 64, 256)]
        self.assertLess(errors[1], errors[0])
        self.assertLessEqual(errors[2], errors[1] + 1e-10)

    def test_needs_a_mode(self):
        grid = build_grid(8, 8)
        with self.assertRaises(InvalidParameter):
            heat_reference(constant_field(grid, 1.0), 0.1, n_modes=0)


class DecayReportTests(SimpleTestCase):
    def test_pure_heat_rate(self):
        generator = assemble_heat_generator(build_heat_grid(200))
        w0 = sample_function(generator.grid, first_mode)
        trajectory = evolve(generator, w0, make_scheme(dt=1e-3), horizon=6.0)
        report = decay_report(trajectory, estimate_beta1(generator))
        self.assertAlmostEqual(report.fitted_rate, np.pi**2 / 4, delta=0.02 * np.pi**2 / 4)
        self.assertTrue(report.bound_satisfied)
        self.assertGreater(report.r_squared, 0.999)

    def test_coupled_rate_is_twice_the_gap(self):
        kernel = make_kernel('triangle')
        generator = assemble_generator(build_grid(100, 100), kernel, coupling_constants(kernel))
        w0 = sample_function(generator.grid, lambda x: np.where(x <= 0, 1.0, 0.0))
        spectral = estimate_beta1(generator)
        trajectory = evolve(generator, w0, make_scheme(dt=1e-3), horizon=10.0)
        report = decay_report(trajectory, spectral)
        self.assertTrue(0.95 * spectral.lambda2 <= report.fitted_rate <= 1.05 * spectral.lambda2)
        self.assertGreaterEqual(report.fitted_rate, spectral.beta1)
        self.assertTrue(report.bound_satisfied)
        self.assertLessEqual(report.fit_window[0], report.fit_window[1])

    def test_constant_run_has_nothing_to_fit(self):
        kernel = make_kernel('triangle')
        generator = assemble_generator(build_grid(20, 20), kernel, coupling_constants(kernel))
        trajectory = evolve(generator, constant_field(generator.grid, 1.0), make_scheme(dt=1e-2), horizon=1.0)
        with self.assertRaises(InsufficientData):
            decay_report(trajectory, estimate_beta1(generator))


class EpsilonSweepTests(SimpleTestCase):
    plan = SweepPlan(family='triangle', radius=1.0, n_local=100, n_nonlocal=200, dt=5e-4)

    def test_error_decreases_with_epsilon(self):
        rows = epsilon_sweep(self.plan, [0.4, 0.2, 0.1, 0.05], horizon=0.5, initial=bump, workers=2)
        errors = [row.sup_error for row in rows]
        self.assertTrue(all(b < a for a, b in zip(errors, errors[1:])), msg=f"errors {errors}")
        gaps = [row.beta1_eps for row in rows]
        self.assertTrue(all(b > a for a, b in zip(gaps, gaps[1:])), msg=f"beta1 {gaps}")
        self.assertTrue(0.7 * np.pi**2 / 8 < gaps[-1] < np.pi**2 / 8, msg=f"beta1 {gaps}")
        jumps = [row.interface_jump for row in rows]
        self.assertTrue(all(b <= a for a, b in zip(jumps, jumps[1:])), msg=f"jumps {jumps}")

    def test_error_is_taken_over_every_step(self):
        plan = SweepPlan(family='triangle', radius=1.0, n_local=40, n_nonlocal=40, dt=1e-2)
        row = epsilon_sweep(plan, [0.2], horizon=0.3, initial=bump, workers=1)[0]
        grid = build_grid(40, 40)
        kernel = make_kernel('triangle', 1.0, 0.2)
        generator = assemble_generator(grid, kernel, coupling_constants(kernel))
        w0 = sample_function(grid, bump)
        reference = HeatReference(w0)
        trajectory = evolve(generator, w0, make_scheme(dt=1e-2), horizon=0.3, snapshot_stride=1)
        errors = [distance(grid, w, reference.at(t)) for t, w in trajectory.snapshots]
        self.assertEqual(len(errors), 31)
        self.assertAlmostEqual(row.sup_error, max(errors), delta=1e-12)

    def test_resolution_is_adjusted(self):
        plan = SweepPlan(family='uniform', radius=1.0, n_local=20, n_nonlocal=20, dt=1e-2)
        rows = epsilon_sweep(plan, [0.5, 0.1], horizon=0.1, initial=bump, workers=1)
        self.assertEqual([row.n_nonlocal for row in rows], [20, 40])

    def test_constant_start_has_no_error(self):
        plan = SweepPlan(family='triangle', radius=1.0, n_local=20, n_nonlocal=20, dt=1e-2)
        rows = epsilon_sweep(plan, [0.4, 0.2], horizon=0.1, initial=lambda x: np.full_like(x, 0.7))
        self.assertTrue(all(row.sup_error <= 1e-10 for row in rows))

    def test_list_must_decrease(self):
        with self.assertRaises(InvalidParameter):
            epsilon_sweep(self.plan, [0.1, 0.2], horizon=0.1, initial=bump)

    def test_plot(self):
        plan = SweepPlan(family='triangle', radius=1.0, n_local=20, n_nonlocal=20, dt=1e-2)
        rows = epsilon_sweep(plan, [0.4, 0.2], horizon=0.1, initial=bump)
        self.assertIn(b'<svg', sweep_svg(rows))


class BarrierTests(SimpleTestCase):
    def setUp(self):
        self.spec = make_barrier_spec(xi0=2.0, a=0.5, T=0.03)
        self.kernel = make_kernel('triangle')
        self.constants = coupling_constants(self.kernel)
        self.grid = build_grid(1000, 16)

    def check(self, sign, sense):
        times, u, v = barrier_fields(self.spec, self.grid, 1e-5, sign=sign)
        return supersolution_check(
            u, v, times, self.grid, self.kernel, self.constants, 1e-6, sense=sense, inequalities=(1, 2, 3),
        )

    def test_profile(self):
        spec = self.spec
        self.assertAlmostEqual(float(spec.profile(0.0, 1)), 1.0)
        self.assertAlmostEqual(float(spec.profile(0.0, 2)), spec.max_curvature)
        xi = np.linspace(-3.0, 0.0, 301)
        self.assertTrue(np.all(np.diff(spec.profile(xi)) >= 0))
        np.testing.assert_allclose(spec.profile(xi[xi <= -2.0]), 1.0)

    def test_invalid_parameters(self):
        with self.assertRaises(InvalidParameter):
            make_barrier_spec(xi0=0.5)
        with self.assertRaises(InvalidParameter):
            make_barrier_spec(T=0.05)
        with self.assertRaises(InvalidParameter):
            make_barrier_spec(xi0=2.0, a=0.9, T=0.01)

    def test_barrier_is_a_supersolution(self):
        report = self.check(1, 'super')
        self.assertTrue(report.passes, msg=str(report.margins))

    def test_negated_barrier_fails_the_heat_inequality(self):
        report = self.check(-1, 'super')
        self.assertIn(1, report.failing())

    def test_negated_barrier_is_a_subsolution(self):
        self.assertTrue(self.check(-1, 'sub').passes)

    def test_exact_solution_satisfies_all_inequalities(self):
        grid = build_grid(20, 20)
        generator = assemble_generator(grid, self.kernel, self.constants)
        w0 = exact_evolution(generator, sample_function(grid, bump), 0.05)
        times = np.linspace(0.0, 0.01, 101)
        states = np.array([exact_evolution(generator, w0, t).values for t in times])
        u, v = states[:, grid.local_slice], states[:, grid.nonlocal_slice]
        for sense in ('super', 'sub'):
            report = supersolution_check(u, v, times, grid, self.kernel, self.constants, 1e-4, sense=sense)
            self.assertTrue(report.passes, msg=f"{sense}: {report.margins}")

    def test_needs_three_samples(self):
        grid = build_grid(8, 8)
        with self.assertRaises(InvalidParameter):
            supersolution_check(
                np.zeros((2, 9)), np.zeros((2, 8)), [0.0, 1.0], grid, self.kernel, self.constants, 1e-6,
            )


class PlotTests(SimpleTestCase):
    def test_decay_plot_is_svg(self):
        generator = assemble_heat_generator(build_heat_grid(20))
        trajectory = evolve(generator, sample_function(generator.grid, first_mode), make_scheme(dt=1e-2), horizon=0.2)
        self.assertIn(b'<svg', decay_svg(trajectory, beta1=1.0))
