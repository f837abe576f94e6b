import unittest
import math
import os
import sys

import numpy as np

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from diagnostics import (
    ORDER_CAP, IdentityReport, check_failures, convergence_suite, dot_bracket, dot_bracket_map,
    estimate_order, exact_identity_suite, f_sigma_split, lp_ratio_report, rank_one_check,
    refinement_pair, self_dual_part_check, trace_weitzenbock, weitzenbock_02, ym_integral_identity,
    _smooth_phi, ym_pointwise_identity,
)
from errors import DegenerateField, UsageError
from gauge_fields import Connection, constant_connection, random_connection, random_form, trigonometric_connection
from lattice_geometry import INDEX_OF, LatticeForm, PQForm, Torus4, sd_asd_project
from lie_algebra import GroupKind, LieAlgebra
from spectral import coefficient_form


def _offset_connection(n, algebra, seed, amplitude, strength):
    """Random field on top of a constant noncommuting one, which keeps lambda(A) off zero."""
    base = constant_connection(n, algebra, strength).potential
    return Connection.from_potential(base + random_connection(n, algebra, seed, amplitude).potential, algebra)


class TestExactIdentities(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.A = _offset_connection(3, self.su2, 0, 0.4, 0.3)

    def test_suite_holds_to_round_off(self):
        reports = exact_identity_suite(self.A, seed=1)
        self.assertGreaterEqual(len(reports), 20)
        for report in reports:
            self.assertTrue(report.exact)
            self.assertLessEqual(report.residual, 1e-10, report.name)
        self.assertEqual(check_failures(reports), [])

    def test_corruption_is_detected(self):
        reports = exact_identity_suite(self.A, seed=1, corrupt=1.0)
        self.assertIn("adjoint_dA_0", check_failures(reports))

    def test_self_dual_part(self):
        F = random_form(3, 2, self.su2, seed=2)
        self.assertLessEqual(self_dual_part_check(F, self.su2).residual, 1e-10)

    def test_trace_weitzenbock(self):
        report = trace_weitzenbock(self.A)
        self.assertTrue(report.exact)
        self.assertLessEqual(report.residual, 1e-10)


class TestWeitzenbock(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.phi = coefficient_form(np.broadcast_to(np.array([1.0, -0.5j, 2.0]), (3, 3, 3, 3, 3)))

    def test_flat_connection(self):
        A = Connection.zeros(3, self.su2)
        for variant in ("antiholomorphic", "full"):
            self.assertLessEqual(weitzenbock_02(A, self.phi, variant).residual, 1e-12)

    def test_constant_connection(self):
        """Constant fields turn the identity into an algebraic one that holds exactly."""
        A = constant_connection(3, self.su2, 0.4)
        report = weitzenbock_02(A, self.phi)
        self.assertLessEqual(report.residual, 1e-10)
        self.assertGreater(report.norm_scale, 0.0)

    def test_input_validation(self):
        A = Connection.zeros(3, self.su2)
        with self.assertRaises(UsageError):
            weitzenbock_02(A, LatticeForm.zeros(3, 2, 3))
        with self.assertRaises(UsageError):
            weitzenbock_02(A, self.phi, variant="holomorphic")

    def test_yang_mills_identities_on_flat_connection(self):
        A = Connection.zeros(3, self.su2)
        self.assertEqual(ym_pointwise_identity(A).residual, 0.0)
        report = ym_integral_identity(A)
        self.assertEqual(report.residual, 0.0)
        self.assertEqual(set(report.extras), {"left", "right", "yang_mills"})


class TestRankOneStructure(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        coords = Torus4(3).coordinates()
        self.f = np.exp(2j * math.pi * coords[0]) * (1.0 + 0.5 * np.cos(2.0 * math.pi * coords[1]))
        self.sigma = np.array([0.6, 0.0, 0.8])

    def test_rank_one_field(self):
        phi = coefficient_form(self.f[..., None] * self.sigma)
        result = rank_one_check(phi, self.su2)
        self.assertLessEqual(result["commutator_norm"], 1e-12)
        self.assertEqual(result["rank_profile"], 1.0)

    def test_generic_field(self):
        c = np.random.default_rng(3).standard_normal((3, 3, 3, 3, 3, 2)) @ np.array([1.0, 1j])
        result = rank_one_check(coefficient_form(c), self.su2)
        self.assertGreater(result["commutator_max"], 1e-3)
        self.assertEqual(result["rank_profile"], 0.0)

    def test_f_sigma_split(self):
        phi = coefficient_form(self.f[..., None] * self.sigma)
        split = f_sigma_split(phi, Connection.zeros(3, self.su2))
        self.assertEqual(split.nonzero_fraction, 1.0)
        self.assertLessEqual(split.residual, 1e-12)
        self.assertLessEqual(split.nabla_sigma, 1e-10)
        np.testing.assert_allclose(np.abs(split.sigma @ self.sigma), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.abs(split.f), np.abs(self.f) / 2.0, atol=1e-12)

    def test_degenerate_split(self):
        zero = PQForm.of(0, 2, np.zeros((3, 3, 3, 3, 6, 3)))
        with self.assertRaises(DegenerateField) as ctx:
            f_sigma_split(zero, Connection.zeros(3, self.su2))
        self.assertEqual(ctx.exception.exit_code, 2)
        with self.assertRaises(UsageError):
            f_sigma_split(LatticeForm.zeros(3, 2, 3), Connection.zeros(3, self.su2))

    def test_split_harmonicity_residuals(self):
        constant = f_sigma_split(coefficient_form(np.broadcast_to((1.0 + 0.5j) * self.sigma, (3, 3, 3, 3, 3))),
                                 Connection.zeros(3, self.su2))
        self.assertEqual((constant.f_d, constant.f_d_star, constant.f_dbar_star), (0.0, 0.0, 0.0))
        wave = f_sigma_split(coefficient_form(self.f[..., None] * self.sigma), Connection.zeros(3, self.su2))
        self.assertGreater(wave.f_d, 0.1)
        self.assertGreater(wave.f_d_star, 0.1)

    def test_commutator_scales_with_perturbation(self):
        c = np.random.default_rng(4).standard_normal((3, 3, 3, 3, 3, 2)) @ np.array([1.0, 1j])
        base = self.f[..., None] * self.sigma
        norms = [rank_one_check(coefficient_form(base + eps * c), self.su2)["commutator_norm"] for eps in (1e-3, 5e-4)]
        self.assertAlmostEqual(norms[0] / norms[1], 2.0, delta=0.05)


class TestDotBracket(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)

    def test_known_value(self):
        """B = omega2 e1 + omega3 e2 gives [B.B] = -4 e3 omega1."""
        B = LatticeForm.zeros(2, 2, 3)
        e1, e2 = np.eye(3)[0], np.eye(3)[1]
        for multi, sign in {(0, 2): 1.0, (1, 3): -1.0}.items():
            B.data[..., INDEX_OF[2][multi], :] = sign * e1
        for multi, sign in {(0, 3): 1.0, (1, 2): 1.0}.items():
            B.data[..., INDEX_OF[2][multi], :] = sign * e2
        result = dot_bracket_map(B, self.su2)
        expected = np.array([0.0, 0.0, -4.0])
        np.testing.assert_allclose(result.component((0, 1))[0, 0, 0, 0], expected, atol=1e-14)
        np.testing.assert_allclose(result.component((2, 3))[0, 0, 0, 0], expected, atol=1e-14)
        np.testing.assert_allclose(result.component((0, 2)), 0.0, atol=1e-14)

    def test_single_direction_vanishes(self):
        B = LatticeForm.zeros(2, 2, 3)
        B.data[..., INDEX_OF[2][(0, 1)], :] = [1.0, 2.0, 3.0]
        B.data[..., INDEX_OF[2][(2, 3)], :] = [1.0, 2.0, 3.0]
        np.testing.assert_allclose(dot_bracket_map(B, self.su2).data, 0.0)

    def test_polarization_is_symmetric(self):
        B, _ = sd_asd_project(random_form(3, 2, self.su2, seed=4))
        C, _ = sd_asd_project(random_form(3, 2, self.su2, seed=5))
        np.testing.assert_allclose(dot_bracket(B, C, self.su2).data, dot_bracket(C, B, self.su2).data, atol=1e-12)

    def test_requires_self_dual(self):
        with self.assertRaises(UsageError):
            dot_bracket_map(random_form(3, 2, self.su2, seed=6), self.su2)


class TestRefinement(unittest.TestCase):

    def test_estimate_order(self):
        self.assertAlmostEqual(estimate_order(1e-2, 2.5e-3), 2.0)
        self.assertEqual(estimate_order(1e-3, 0.0), ORDER_CAP)
        self.assertEqual(estimate_order(0.0, 1e-3), -ORDER_CAP)

    def test_refinement_pair(self):
        report = refinement_pair(lambda m: IdentityReport("first_order", 1.0 / m, 1.0, m), 4)
        self.assertEqual(report.n, 8)
        self.assertAlmostEqual(report.order_estimate, 1.0)
        self.assertEqual(report.extras["coarse_residual"], 0.25)

    def test_check_failures(self):
        reports = [
            IdentityReport("exact_ok", 1e-14, 1.0, 4, exact=True),
            IdentityReport("exact_bad", -1e-6, 1.0, 4, exact=True),
            IdentityReport("slow", 0.1, 1.0, 8, order_estimate=0.5),
            IdentityReport("fast", 0.1, 1.0, 8, order_estimate=1.9),
        ]
        self.assertEqual(reports[1].residual, 1e-6)
        self.assertEqual(check_failures(reports), ["exact_bad", "slow"])
        self.assertEqual(check_failures(reports, exact_tol=1e-5, order_min=0.4), [])

    def test_convergence_suite(self):
        reports = convergence_suite(8, LieAlgebra(GroupKind.SU2))
        names = [report.name for report in reports]
        self.assertEqual(names, ["curvature_consistency", "bianchi", "weitzenbock_02_antiholomorphic", "correction_stencils"])
        self.assertTrue(all(report.order_estimate is not None for report in reports))
        self.assertGreaterEqual(reports[0].order_estimate, 0.8)
        self.assertGreaterEqual(reports[2].order_estimate, 1.0)

    def test_full_weitzenbock_converges(self):
        algebra = LieAlgebra(GroupKind.SU2)
        report = refinement_pair(
            lambda m: weitzenbock_02(trigonometric_connection(m, algebra), _smooth_phi(m, algebra), "full"), 8)
        self.assertGreaterEqual(report.order_estimate, 0.8)


class TestLpRatio(unittest.TestCase):

    def test_lp_ratio(self):
        su2 = LieAlgebra(GroupKind.SU2)
        result = lp_ratio_report(Connection.zeros(3, su2), 6.0)
        self.assertAlmostEqual(result["q"], 1.5)
        self.assertEqual(result["ratio"], 0.0)
        with self.assertRaises(UsageError):
            lp_ratio_report(Connection.zeros(3, su2), 4.0)


if __name__ == '__main__':
    unittest.main()
