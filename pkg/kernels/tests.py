import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import quad

from core.exceptions import InvalidParameter
from .models import KernelFamily
from .services import (
    coupling_constants,
    coupling_profile,
    coupling_profile_analytic,
    kernel_quadrature,
    make_kernel,
    second_moment,
)

FAMILIES = KernelFamily.values
EPSILONS = [1.0, 0.5, 0.25, 0.1]


class MakeKernelTests(SimpleTestCase):
    def test_point_values(self):
        self.assertAlmostEqual(float(make_kernel('uniform', 1.0, 1.0)(0.0)), 0.5)
        self.assertAlmostEqual(float(make_kernel('triangle', 1.0, 1.0)(0.5)), 0.5)

    def test_rescaled_uniform_integrates_to_eps_minus_two(self):
        kernel = make_kernel('uniform', 1.0, 0.25)
        self.assertAlmostEqual(kernel_quadrature(kernel, 10_000), 16.0, places=9)

    def test_even_and_nonnegative_with_compact_support(self):
        z = np.linspace(-3, 3, 1201)
        for family in FAMILIES:
            kernel = make_kernel(family, 1.5, 0.5)
            values = kernel(z)
            self.assertTrue(np.all(values >= 0))
            np.testing.assert_array_equal(values, kernel(-z))
            self.assertTrue(np.all(values[np.abs(z) > kernel.support] == 0))

    def test_mass_by_quadrature(self):
        for family in FAMILIES:
            for eps in EPSILONS:
                kernel = make_kernel(family, 1.0, eps)
                mass = kernel_quadrature(kernel, 10_000)
                self.assertLess(abs(mass * eps**2 - 1.0), 1e-8, msg=f"{family} eps={eps}")

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidParameter):
            make_kernel('gaussian', 1.0, 1.0)
        with self.assertRaises(InvalidParameter):
            make_kernel('triangle', 0.0, 1.0)
        with self.assertRaises(InvalidParameter):
            make_kernel('triangle', 1.0, -0.5)

    def test_continuity_flag(self):
        self.assertFalse(make_kernel('uniform').is_continuous)
        self.assertTrue(make_kernel('triangle').is_continuous)


class MomentTests(SimpleTestCase):
    def test_closed_form_moments(self):
        self.assertAlmostEqual(second_moment(make_kernel('uniform')), 1 / 3)
        self.assertAlmostEqual(second_moment(make_kernel('triangle')), 1 / 6)
        self.assertAlmostEqual(second_moment(make_kernel('epanechnikov')), 1 / 5)

    def test_rescaled_second_moment_is_eps_independent(self):
        for family in FAMILIES:
            expected = second_moment(make_kernel(family, 1.0))
            for eps in EPSILONS:
                kernel = make_kernel(family, 1.0, eps)
                moment = kernel_quadrature(kernel, 100_000, power=2)
                self.assertLess(abs(moment / expected - 1.0), 1e-8, msg=f"{family} eps={eps}")

    def test_coupling_constants(self):
        self.assertAlmostEqual(coupling_constants(make_kernel('uniform')).c1, 6.0)
        self.assertAlmostEqual(coupling_constants(make_kernel('triangle')).c1, 12.0)
        constants = coupling_constants(make_kernel('epanechnikov'))
        self.assertAlmostEqual(constants.c1, 10.0)
        self.assertEqual(constants.c2, 1.0)
        self.assertAlmostEqual(constants.m_j, 0.2)

    def test_constants_ignore_rescaling(self):
        self.assertEqual(
            coupling_constants(make_kernel('triangle', 1.0, 0.1)),
            coupling_constants(make_kernel('triangle', 1.0, 1.0)),
        )

    def test_overrides(self):
        constants = coupling_constants(make_kernel('triangle'), c1=3.0, c2=2.0)
        self.assertEqual((constants.c1, constants.c2), (3.0, 2.0))
        with self.assertRaises(InvalidParameter):
            coupling_constants(make_kernel('triangle'), c2=0.0)


class CouplingProfileTests(SimpleTestCase):
    def test_closed_form_values(self):
        self.assertAlmostEqual(coupling_profile_analytic(make_kernel('uniform'), 0.5), 0.25)
        self.assertAlmostEqual(coupling_profile_analytic(make_kernel('triangle'), 0.5), 0.125)

    def test_vanishes_beyond_support(self):
        for family in FAMILIES:
            kernel = make_kernel(family, 1.0, 0.25)
            self.assertEqual(coupling_profile_analytic(kernel, 0.25), 0.0)
            self.assertEqual(coupling_profile_analytic(kernel, 0.9), 0.0)

    def test_matches_adaptive_quadrature(self):
        rng = np.random.default_rng(7)
        for family in FAMILIES:
            for eps in (1.0, 0.3):
                kernel = make_kernel(family, 1.0, eps)
                for y in rng.uniform(0.0, 1.0, 100):
                    breaks = [s for s in (y - kernel.support, y + kernel.support) if -1.0 < s < 0.0]
                    exact, _ = quad(lambda s: float(kernel(y - s)), -1.0, 0.0,
                                    points=breaks or None, epsabs=1e-13, epsrel=1e-13, limit=200)
                    self.assertLess(abs(coupling_profile_analytic(kernel, y) - exact), 1e-10)

    def test_nonincreasing(self):
        y = np.linspace(0.001, 0.999, 500)
        for family in FAMILIES:
            q = coupling_profile(make_kernel(family, 1.0, 0.5), y)
            self.assertTrue(np.all(np.diff(q) <= 1e-14))

    def test_rejects_points_outside_nonlocal_region(self):
        with self.assertRaises(InvalidParameter):
            coupling_profile_analytic(make_kernel('triangle'), 0.0)
        with self.assertRaises(InvalidParameter):
            coupling_profile_analytic(make_kernel('triangle'), 1.2)
