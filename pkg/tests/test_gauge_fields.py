import unittest
import os
import sys

import numpy as np

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from errors import UsageError
from gauge_fields import (
    Connection, GaugeTransform, apply_gauge, centered_curvature, constant_connection, curvature, dA, dA_star,
    delbar, energy_split, nabla, nabla_star, random_connection, random_form, random_smooth_gauge, sobolev_norm,
    topological_term, trigonometric_connection, trigonometric_curvature, ym_energy,
)
from lattice_geometry import LatticeForm, PQForm, l2_inner, l2_norm, lp_norm, sd_asd_project
from lie_algebra import GroupKind, LieAlgebra


def _offset_connection(n, algebra, seed, amplitude, strength):
    """Random field on top of a constant noncommuting one, which keeps lambda(A) off zero."""
    base = constant_connection(n, algebra, strength).potential
    return Connection.from_potential(base + random_connection(n, algebra, seed, amplitude).potential, algebra)


class TestCurvature(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.u1 = LieAlgebra(GroupKind.U1)

    def test_zero_connection_is_flat(self):
        A = Connection.zeros(3, self.su2)
        np.testing.assert_allclose(curvature(A).data, 0.0)
        self.assertEqual(ym_energy(A), 0.0)

    def test_u1_pure_gauge_is_flat(self):
        g = random_smooth_gauge(4, GroupKind.U1, seed=2, amplitude=1.0)
        self.assertLess(g.unitarity_defect(), 1e-12)
        A = apply_gauge(Connection.zeros(4, self.u1), g)
        self.assertGreater(np.max(np.abs(A.potential)), 0.1)
        np.testing.assert_allclose(curvature(A).data, 0.0, atol=1e-10)

    def test_constant_gauge_keeps_energy(self):
        A = _offset_connection(3, self.su2, 0, 0.3, 0.2)
        g = GaugeTransform.constant(3, GroupKind.SU2, np.array([0.6, 0.0, 0.8, 0.0]))
        B = apply_gauge(A, g)
        self.assertAlmostEqual(ym_energy(B), ym_energy(A), places=10)
        self.assertAlmostEqual(l2_norm(dA_star(curvature(B), B)), l2_norm(dA_star(curvature(A), A)), places=10)

    def test_gauge_kind_mismatch(self):
        A = Connection.zeros(3, self.su2)
        with self.assertRaises(UsageError):
            apply_gauge(A, GaugeTransform.identity(3, GroupKind.U1))
        with self.assertRaises(UsageError):
            apply_gauge(A, GaugeTransform.identity(4, GroupKind.SU2))

    def test_lattice_curvature_converges(self):
        errors = []
        for n in (4, 8):
            A = trigonometric_connection(n, self.su2)
            errors.append(l2_norm(curvature(A).data - trigonometric_curvature(n, self.su2).data))
        self.assertLess(errors[1], 0.75 * errors[0])

    def test_centered_curvature(self):
        A = constant_connection(3, self.su2, 0.4)
        np.testing.assert_allclose(centered_curvature(A).data, curvature(A).data, atol=1e-14)
        errors = []
        for n in (8, 16):
            A = trigonometric_connection(n, self.su2)
            errors.append(l2_norm(centered_curvature(A).data - trigonometric_curvature(n, self.su2).data))
        self.assertLess(errors[1], 0.3 * errors[0])


class TestCovariantOperators(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.A = _offset_connection(3, self.su2, 4, 0.4, 0.3)

    def test_dA_adjointness(self):
        for degree in range(4):
            u = random_form(3, degree, self.su2, seed=30 + degree)
            v = random_form(3, degree + 1, self.su2, seed=40 + degree)
            lhs = l2_inner(dA(u, self.A), v)
            rhs = l2_inner(u, dA_star(v, self.A))
            self.assertLessEqual(abs(lhs - rhs), 1e-12 * max(1.0, abs(lhs)))

    def test_nabla_adjointness(self):
        u = random_form(3, 2, self.su2, seed=5)
        g = np.random.default_rng(6).standard_normal((3, 3, 3, 3, 4, 6, 3))
        grad = nabla(u, self.A)
        self.assertEqual(grad.shape, g.shape)
        lhs = l2_inner(grad, g)
        rhs = l2_inner(u.data, nabla_star(g, self.A))
        self.assertLessEqual(abs(lhs - rhs), 1e-12 * max(1.0, abs(lhs)))

    def test_dolbeault_types(self):
        f = random_form(3, 0, self.su2, seed=7)
        self.assertEqual(delbar(f, self.A).bidegree, (0, 1))
        f02 = PQForm.from_coefficients(0, 2, np.ones((3, 3, 3, 3, 1, 3), dtype=complex))
        top = delbar(f02, self.A)
        self.assertEqual(top.degree, 3)
        np.testing.assert_allclose(top.data, 0.0)

    def test_flat_delbar_squares_to_zero(self):
        flat = Connection.zeros(4, self.su2)
        f = random_form(4, 0, self.su2, seed=8)
        np.testing.assert_allclose(delbar(delbar(f, flat), flat).data, 0.0, atol=1e-10)

    def test_sobolev_norm(self):
        u = random_form(3, 1, self.su2, seed=9)
        self.assertAlmostEqual(sobolev_norm(u, self.A, p=2.0, k=0), lp_norm(u, 2.0, self.su2), places=12)
        self.assertGreater(sobolev_norm(u, self.A, p=2.0, k=1), sobolev_norm(u, self.A, p=2.0, k=0))
        with self.assertRaises(UsageError):
            sobolev_norm(u, self.A, k=-1)


class TestEnergies(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)

    def test_energy_decomposition(self):
        A = _offset_connection(3, self.su2, 1, 0.5, 0.3)
        split = energy_split(A)
        total = 4.0 * split["f02_sq"] + split["trace_sq"] + split["topological"]
        self.assertLessEqual(abs(total - split["ym"]), 1e-10 * split["ym"])

    def test_topological_term_from_self_dual_split(self):
        A = random_connection(3, self.su2, seed=2, amplitude=0.5)
        F = curvature(A)
        plus, minus = sd_asd_project(F)
        expected = l2_norm(minus, self.su2) ** 2 - l2_norm(plus, self.su2) ** 2
        self.assertAlmostEqual(topological_term(F, self.su2), expected, places=10)


class TestFieldGenerators(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)

    def test_random_connection_is_deterministic(self):
        a = random_connection(3, self.su2, seed=11, amplitude=0.2)
        b = random_connection(3, self.su2, seed=11, amplitude=0.2)
        c = random_connection(3, self.su2, seed=12, amplitude=0.2)
        np.testing.assert_array_equal(a.potential, b.potential)
        self.assertFalse(np.allclose(a.potential, c.potential))

    def test_amplitude_is_pointwise_max(self):
        A = random_connection(4, self.su2, seed=3, amplitude=0.2)
        peak = np.max(np.sqrt(np.sum(A.potential ** 2, axis=(4, 5))))
        self.assertAlmostEqual(peak, 0.2, places=12)
        zero = random_connection(4, self.su2, seed=3, amplitude=0.0)
        np.testing.assert_array_equal(zero.potential, 0.0)
        with self.assertRaises(UsageError):
            random_connection(4, self.su2, seed=3, amplitude=-0.1)

    def test_same_field_on_refined_grid(self):
        coarse = random_connection(4, self.su2, seed=5, amplitude=1.0, smoothness=1).potential
        fine = random_connection(8, self.su2, seed=5, amplitude=1.0, smoothness=1).potential
        sub = fine[::2, ::2, ::2, ::2]
        np.testing.assert_allclose(sub / np.max(np.abs(sub)), coarse / np.max(np.abs(coarse)), atol=1e-12)

    def test_connection_validation(self):
        with self.assertRaises(UsageError):
            Connection(self.su2, LatticeForm.zeros(3, 2, 3))
        with self.assertRaises(UsageError):
            Connection(self.su2, LatticeForm.zeros(3, 1, 1))
        bad = np.zeros((3, 3, 3, 3, 4, 3))
        bad[0, 0, 0, 0, 0, 0] = np.nan
        with self.assertRaises(UsageError):
            Connection.from_potential(bad, self.su2)


if __name__ == '__main__':
    unittest.main()
