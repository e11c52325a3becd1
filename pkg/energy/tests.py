import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidParameter
from discretization.models import StateField
from discretization.services import (
    assemble_generator,
    assemble_heat_generator,
    build_grid,
    build_heat_grid,
    constant_field,
    mass,
    sample_function,
    weighted_inner,
)
from kernels.services import coupling_constants, make_kernel
from .services import (
    energy,
    energy_control_sweep,
    estimate_beta1,
    estimate_energy_control_k,
    nonlocal_energy_full,
    poincare_check,
    rayleigh,
)


def setup(n_local, n_nonlocal, family='triangle', eps=1.0):
    grid = build_grid(n_local, n_nonlocal)
    kernel = make_kernel(family, 1.0, eps)
    constants = coupling_constants(kernel)
    return grid, kernel, constants


def indicator_of_right_half(grid):
    return sample_function(grid, lambda x: np.where(x > 0, 1.0, 0.0))


class EnergyTests(SimpleTestCase):
    def test_constant_state_has_no_energy(self):
        grid, kernel, constants = setup(20, 20)
        e = energy(grid, kernel, constants, constant_field(grid, 5.0))
        self.assertEqual((e.local_term, e.nonlocal_term, e.coupling_term), (0.0, 0.0, 0.0))

    def test_interface_term_for_indicator(self):
        grid, kernel, constants = setup(200, 200)
        e = energy(grid, kernel, constants, indicator_of_right_half(grid))
        self.assertEqual(e.local_term, 0.0)
        self.assertEqual(e.nonlocal_term, 0.0)
        self.assertAlmostEqual(e.coupling_term, 1.0 / 12.0, delta=1e-5)

    def test_total_is_the_sum_of_terms(self):
        grid, kernel, constants = setup(20, 30, 'uniform', 0.5)
        w = StateField(grid, np.random.default_rng(0).standard_normal(grid.size))
        e = energy(grid, kernel, constants, w)
        self.assertEqual(e.total, e.local_term + e.nonlocal_term + e.coupling_term)
        for term in (e.local_term, e.nonlocal_term, e.coupling_term):
            self.assertGreaterEqual(term, 0.0)

    def test_energy_is_half_the_generator_form(self):
        grid, kernel, constants = setup(30, 40, 'epanechnikov', 0.5)
        L = assemble_generator(grid, kernel, constants)
        rng = np.random.default_rng(11)
        for _ in range(100):
            w = StateField(grid, rng.standard_normal(grid.size))
            expected = -0.5 * weighted_inner(grid, w, L.apply(w))
            total = energy(grid, kernel, constants, w).total
            self.assertLessEqual(abs(total - expected), 1e-10 * abs(expected))

    def test_small_energy_means_nearly_constant(self):
        grid, kernel, constants = setup(20, 20)
        rng = np.random.default_rng(5)
        w = StateField(grid, 1.0 + 1e-3 * rng.standard_normal(grid.size))
        self.assertGreater(energy(grid, kernel, constants, w).total, 1e-14)

    def test_grid_mismatch(self):
        grid, kernel, constants = setup(20, 20)
        with self.assertRaises(InvalidParameter):
            energy(grid, kernel, constants, constant_field(build_grid(20, 24), 1.0))


class FullNonlocalEnergyTests(SimpleTestCase):
    def test_constant(self):
        grid, kernel, _ = setup(20, 20)
        self.assertEqual(nonlocal_energy_full(grid, kernel, constant_field(grid, 2.0)), 0.0)

    def test_indicator_with_uniform_kernel(self):
        # 2 * (area of the triangle x - y <= 1 in (0,1) x (-1,0)) * J = 2 * 1/2 * 1/2
        grid, kernel, _ = setup(200, 200, 'uniform', 1.0)
        value = nonlocal_energy_full(grid, kernel, indicator_of_right_half(grid))
        self.assertAlmostEqual(value, 0.5, delta=0.02)

    def test_nonnegative(self):
        grid, kernel, _ = setup(16, 16, 'triangle', 0.5)
        rng = np.random.default_rng(2)
        for _ in range(10):
            w = StateField(grid, rng.standard_normal(grid.size))
            self.assertGreaterEqual(nonlocal_energy_full(grid, kernel, w), 0.0)


class SpectralGapTests(SimpleTestCase):
    def test_pure_heat_gap(self):
        report = estimate_beta1(assemble_heat_generator(build_heat_grid(400)))
        self.assertAlmostEqual(report.beta1, np.pi**2 / 8, delta=1e-4)

    def test_coupled_gap(self):
        grid, kernel, constants = setup(200, 200)
        report = estimate_beta1(assemble_generator(grid, kernel, constants))
        self.assertGreater(report.beta1, 0.0)
        self.assertEqual(report.lambda2, 2.0 * report.beta1)
        self.assertLessEqual(report.residual, 1e-8 * report.lambda2)
        self.assertLessEqual(abs(mass(grid, report.eigvec)), 1e-10)

    def test_gap_is_grid_stable(self):
        gaps = []
        for n in (200, 400):
            grid, kernel, constants = setup(n, n)
            gaps.append(estimate_beta1(assemble_generator(grid, kernel, constants)).beta1)
        self.assertLess(abs(gaps[1] - gaps[0]) / gaps[0], 0.01)

    def test_rayleigh_quotient(self):
        grid, kernel, constants = setup(60, 60, 'epanechnikov', 0.5)
        report = estimate_beta1(assemble_generator(grid, kernel, constants))
        self.assertAlmostEqual(rayleigh(grid, kernel, constants, report.eigvec), report.beta1, delta=1e-8)
        rng = np.random.default_rng(4)
        for _ in range(20):
            w = StateField(grid, rng.standard_normal(grid.size))
            value = rayleigh(grid, kernel, constants, w)
            self.assertGreaterEqual(value, report.beta1 - 1e-8)
            shifted = w.with_values(w.values + 3.0)
            self.assertAlmostEqual(rayleigh(grid, kernel, constants, shifted), value, delta=1e-9 * value)

    def test_rayleigh_rejects_constants(self):
        grid, kernel, constants = setup(20, 20)
        with self.assertRaises(InvalidParameter):
            rayleigh(grid, kernel, constants, constant_field(grid, 1.0))


class EnergyControlTests(SimpleTestCase):
    def test_positive_and_deterministic(self):
        grid, kernel, constants = setup(20, 20)
        first = estimate_energy_control_k(grid, kernel, constants, 100, seed=7)
        self.assertGreater(first, 0.0)
        self.assertEqual(first, estimate_energy_control_k(grid, kernel, constants, 100, seed=7))

    def test_more_samples_never_raise_the_minimum(self):
        grid, kernel, constants = setup(20, 20)
        short = estimate_energy_control_k(grid, kernel, constants, 100, seed=3)
        long = estimate_energy_control_k(grid, kernel, constants, 1000, seed=3)
        self.assertLessEqual(long, short)

    def test_sample_count(self):
        grid, kernel, constants = setup(20, 20)
        with self.assertRaises(InvalidParameter):
            estimate_energy_control_k(grid, kernel, constants, 5, seed=0)

    def test_uniform_in_epsilon(self):
        rows = energy_control_sweep('triangle', 1.0, [1.0, 0.5, 0.25], n_samples=200, seed=1)
        self.assertEqual([row.n_nonlocal for row in rows], [8, 16, 32])
        at_one = rows[0].k_estimate
        self.assertGreaterEqual(min(row.k_estimate for row in rows), 0.5 * at_one)


class PoincareTests(SimpleTestCase):
    def test_constant_calibrated_at_unit_scale_holds_for_smaller_scales(self):
        grid = build_grid(80, 80)
        report = poincare_check(grid, 'triangle', 1.0, [1.0, 0.5, 0.25, 0.1], n_samples=50, seed=9)
        self.assertGreater(report.constant, 0.0)
        self.assertEqual(len(report.rows), 4)
        self.assertEqual(report.violations, 0)
