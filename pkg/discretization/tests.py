import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import eigh

from core.exceptions import InvalidParameter, ResolutionError
from kernels.models import KernelFamily
from kernels.services import coupling_constants, make_kernel
from .models import StateField
from .services import (
    assemble_generator,
    assemble_heat_generator,
    build_grid,
    build_heat_grid,
    constant_field,
    interface_jump,
    mass,
    operator_structure,
    sample_function,
    snapshot_rows,
    weighted_inner,
)


def coupled(n_local=50, n_nonlocal=50, family='triangle', eps=1.0):
    grid = build_grid(n_local, n_nonlocal)
    kernel = make_kernel(family, 1.0, eps)
    return grid, assemble_generator(grid, kernel, coupling_constants(kernel))


class GridTests(SimpleTestCase):
    def test_small_grid_positions(self):
        grid = build_grid(4, 4)
        np.testing.assert_allclose(grid.local_nodes, [-1, -0.75, -0.5, -0.25, 0])
        np.testing.assert_allclose(grid.nonlocal_centers, [0.125, 0.375, 0.625, 0.875])

    def test_weights_measure_the_domain(self):
        for n_l, n_nl in [(4, 4), (7, 13), (200, 200)]:
            self.assertAlmostEqual(build_grid(n_l, n_nl).weights.sum(), 2.0, places=13)
        self.assertAlmostEqual(build_heat_grid(200).weights.sum(), 2.0, places=13)

    def test_interface_index(self):
        grid = build_grid(200, 200)
        self.assertEqual(grid.interface_index, 200)
        self.assertEqual(grid.local_nodes[grid.interface_index], 0.0)

    def test_ordering(self):
        grid = build_grid(10, 12)
        self.assertTrue(np.all(np.diff(grid.local_nodes) > 0))
        self.assertTrue(np.all((grid.nonlocal_centers > 0) & (grid.nonlocal_centers < 1)))

    def test_minimum_counts(self):
        with self.assertRaises(InvalidParameter):
            build_grid(3, 10)
        with self.assertRaises(InvalidParameter):
            build_grid(10, 2)

    def test_state_validation(self):
        grid = build_grid(4, 4)
        with self.assertRaises(InvalidParameter):
            StateField(grid, np.zeros(5))
        with self.assertRaises(InvalidParameter):
            StateField(grid, np.full(grid.size, np.nan))


class GeneratorStructureTests(SimpleTestCase):
    def test_constant_state_is_stationary(self):
        grid, L = coupled()
        np.testing.assert_allclose(L.apply(constant_field(grid, 1.0)).values, 0.0, atol=1e-9)

    def test_weighted_symmetry(self):
        _, L = coupled(50, 50, 'triangle', 1.0)
        self.assertLessEqual(operator_structure(L).symmetry_defect, 1e-12)

    def test_all_families_and_scales(self):
        for family in KernelFamily.values:
            for eps in (1.0, 0.25):
                _, L = coupled(40, 40, family, eps)
                report = operator_structure(L)
                self.assertTrue(report.passes(), msg=f"{family} eps={eps}: {report}")

    def test_weighted_column_sums_vanish(self):
        grid, L = coupled()
        column_sums = grid.weights @ L.dense()
        self.assertLess(np.abs(column_sums).max(), 1e-12 * np.abs(L.dense()).max())

    def test_mass_identity_for_random_states(self):
        grid, L = coupled(30, 40, 'epanechnikov', 0.5)
        rng = np.random.default_rng(3)
        for _ in range(20):
            w = StateField(grid, rng.standard_normal(grid.size))
            self.assertLess(abs(mass(grid, L.apply(w))), 1e-12 * np.abs(L.dense()).max() * np.linalg.norm(w.values))

    def test_implicit_matrix_is_an_m_matrix(self):
        grid, L = coupled(30, 30, 'uniform', 0.5)
        for dt in (1e-4, 1e-2, 1.0):
            M = np.eye(grid.size) - dt * L.dense()
            off = M - np.diag(np.diag(M))
            np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-10)
            self.assertTrue(np.all(np.diag(M) >= 1.0))
            self.assertTrue(np.all(off <= 0.0))

    def test_robin_row(self):
        grid, L = coupled(10, 16)
        N = grid.interface_index
        row = L.dense()[N]
        self.assertAlmostEqual(row[N - 1], 2.0 / grid.h_local**2)
        self.assertGreater(row[N + 1], 0.0)
        self.assertAlmostEqual(row.sum(), 0.0, places=9)

    def test_under_resolved_kernel(self):
        grid = build_grid(20, 20)
        kernel = make_kernel('triangle', 1.0, 0.1)
        with self.assertRaises(ResolutionError):
            assemble_generator(grid, kernel, coupling_constants(kernel))

    def test_heat_grid_rejected_by_coupled_assembly(self):
        kernel = make_kernel('triangle')
        with self.assertRaises(InvalidParameter):
            assemble_generator(build_heat_grid(20), kernel, coupling_constants(kernel))

    def test_spectrum_is_nonnegative_with_single_zero(self):
        for family, eps in [('triangle', 1.0), ('uniform', 0.25)]:
            grid, L = coupled(60, 60, family, eps)
            A = -grid.weights[:, None] * L.dense()
            values = eigh(0.5 * (A + A.T), np.diag(grid.weights), eigvals_only=True)
            self.assertGreaterEqual(values.min(), -1e-10)
            self.assertEqual(int(np.sum(np.abs(values) < 1e-8)), 1)

    def test_nonlocal_rows_approach_second_derivative(self):
        def bump(x):
            s = (x - 0.5) / 0.2
            return np.where(np.abs(s) < 1, np.cos(0.5 * np.pi * s) ** 4, 0.0)

        def bump_second(x):
            s = (x - 0.5) / 0.2
            a = 0.5 * np.pi * s
            c, si = np.cos(a), np.sin(a)
            scale = (0.5 * np.pi / 0.2) ** 2
            return np.where(np.abs(s) < 1, scale * (12 * c**2 * si**2 - 4 * c**4), 0.0)

        errors = []
        for eps in (0.2, 0.1, 0.05):
            grid, L = coupled(20, 800, 'triangle', eps)
            w = sample_function(grid, lambda x: np.where(x > 0, bump(x), 0.0))
            y = grid.nonlocal_centers
            errors.append(np.abs(L.apply(w).v - bump_second(y)).max())
        self.assertLessEqual(errors[1], errors[0])
        self.assertLessEqual(errors[2], errors[1])


class HeatGeneratorTests(SimpleTestCase):
    def test_neumann_laplacian(self):
        grid = build_heat_grid(100)
        L = assemble_heat_generator(grid)
        report = operator_structure(L)
        self.assertTrue(report.passes())
        self.assertAlmostEqual(L.diagonal[0], -2.0 / grid.h_local**2)


class QuadratureTests(SimpleTestCase):
    def test_mass_examples(self):
        grid = build_grid(8, 8)
        self.assertAlmostEqual(mass(grid, constant_field(grid, 1.0)), 2.0)
        self.assertEqual(mass(grid, constant_field(grid, 0.0)), 0.0)
        step = sample_function(grid, lambda x: np.where(x <= 0, 1.0, 0.0))
        self.assertAlmostEqual(mass(grid, step), 1.0)

    def test_inner_product(self):
        grid = build_grid(8, 12)
        one = constant_field(grid, 1.0)
        self.assertAlmostEqual(weighted_inner(grid, one, one), 2.0)
        rng = np.random.default_rng(1)
        a = StateField(grid, rng.standard_normal(grid.size))
        b = StateField(grid, rng.standard_normal(grid.size))
        self.assertAlmostEqual(weighted_inner(grid, a, b), weighted_inner(grid, b, a))
        self.assertGreater(weighted_inner(grid, a, a), 0.0)
        self.assertEqual(weighted_inner(grid, constant_field(grid, 0.0), constant_field(grid, 0.0)), 0.0)

    def test_grid_mismatch(self):
        a = constant_field(build_grid(8, 8), 1.0)
        b = constant_field(build_grid(8, 10), 1.0)
        with self.assertRaises(InvalidParameter):
            weighted_inner(a.grid, a, b)


class SnapshotTests(SimpleTestCase):
    def test_rows_tag_interface_as_local(self):
        grid = build_grid(4, 4)
        rows = list(snapshot_rows(constant_field(grid, 2.0)))
        self.assertEqual(len(rows), grid.size)
        self.assertEqual(rows[grid.interface_index][2], 'local')
        self.assertEqual(rows[grid.interface_index + 1][2], 'nonlocal')

    def test_interface_jump(self):
        grid = build_grid(4, 4)
        self.assertEqual(interface_jump(constant_field(grid, 3.0)), 0.0)
        step = sample_function(grid, lambda x: np.where(x <= 0, 1.0, 0.0))
        self.assertAlmostEqual(interface_jump(step), 1.0)
