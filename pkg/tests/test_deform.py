import unittest
import os
import sys

import numpy as np

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from deform import (
    BMAP_CONSTANT, DeformConfig, DeformMode, FlowConfig, FlowMethod, bilinear_estimate, bmap, bmap_bound_ratio,
    correction_potential, energy_along, exact_line_step, fit_geometric_decay, laplace_estimates, taubes_deform,
    ym_gradient_flow,
)
from diagnostics import harmonicity_report, refinement_pair
from errors import ConfigError, NearReducible, NoContraction, StepRejectionLimit, UsageError
from gauge_fields import (
    Connection, constant_connection, curvature, kahler_background, random_connection, random_form,
    trigonometric_connection, ym_energy,
)
from lattice_geometry import LatticeForm, Torus4, l2_norm
from lie_algebra import GroupKind, LieAlgebra


def _offset_connection(n, algebra, seed, amplitude, strength):
    """Random field on top of a constant noncommuting one, which keeps lambda(A) off zero."""
    base = constant_connection(n, algebra, strength).potential
    return Connection.from_potential(base + random_connection(n, algebra, seed, amplitude).potential, algebra)


def _kahler_connection(n, algebra, seed, amplitude, strength=0.3):
    """Random perturbation of a constant background whose Lambda F vanishes."""
    base = kahler_background(n, algebra, strength).potential
    return Connection.from_potential(base + random_connection(n, algebra, seed, amplitude).potential, algebra)


class TestBilinearMap(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.A = _offset_connection(3, self.su2, 0, 0.3, 0.3)
        self.u = random_form(3, 0, self.su2, seed=1)
        self.v = random_form(3, 0, self.su2, seed=2)

    def test_symmetric_and_bilinear(self):
        uv = bmap(self.u, self.v, self.A).data
        np.testing.assert_allclose(bmap(self.v, self.u, self.A).data, uv, atol=1e-10)
        np.testing.assert_allclose(bmap(self.u * 2.0, self.v, self.A).data, 2.0 * uv, atol=1e-10)

    def test_pointwise_bound(self):
        self.assertLessEqual(bmap_bound_ratio(self.u, self.v, self.A), BMAP_CONSTANT + 1e-12)

    def test_abelian_map_vanishes(self):
        u1 = LieAlgebra(GroupKind.U1)
        A = random_connection(3, u1, seed=3, amplitude=0.3)
        u = random_form(3, 0, u1, seed=4)
        np.testing.assert_array_equal(bmap(u, u, A).data, 0.0)

    def test_degree_checked(self):
        with self.assertRaises(UsageError):
            bmap(LatticeForm.zeros(3, 1, 3), self.v, self.A)

    def test_correction_stencils(self):
        s = random_form(3, 0, self.su2, seed=5)
        for correction in ("adjoint", "dolbeault"):
            a = correction_potential(s, self.A, correction)
            self.assertEqual(a.degree, 1)
            self.assertFalse(a.is_complex)
        with self.assertRaises(UsageError):
            correction_potential(s, self.A, "forward")

    def test_correction_stencils_agree_on_smooth_input(self):
        errors = []
        for n in (8, 16):
            A = trigonometric_connection(n, self.su2)
            coords = Torus4(n).coordinates()
            s = LatticeForm.scalar(np.sin(2.0 * np.pi * (coords[0] + coords[3]))[..., None] * np.ones(3))
            adjoint = correction_potential(s, A, "adjoint")
            dolbeault = correction_potential(s, A, "dolbeault")
            errors.append(l2_norm(adjoint.data - dolbeault.data) / l2_norm(adjoint))
        self.assertLess(errors[0], 0.5)
        self.assertGreaterEqual(np.log2(errors[0] / errors[1]), 0.9)


class TestDeform(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)

    def test_flat_connection_short_circuits(self):
        result = taubes_deform(Connection.zeros(3, self.su2))
        self.assertEqual(result.iterations, 1)
        self.assertEqual(result.final_residual, 0.0)
        np.testing.assert_array_equal(result.s.data, 0.0)

    def test_discrete_residual_reaches_tolerance(self):
        A = _offset_connection(4, self.su2, 0, 0.05, 0.3)
        cfg = DeformConfig(tol=1e-8)
        result = taubes_deform(A, cfg)
        self.assertIs(result.mode, DeformMode.DISCRETE_RESIDUAL)
        self.assertLessEqual(result.final_residual, 1e-8)
        self.assertGreater(result.trace_norms[0], result.trace_norms[-1])
        self.assertGreater(result.lam, cfg.lambda_floor)
        self.assertIn("f02_shift_ratio", result.to_payload())

    def test_u1_is_near_reducible(self):
        A = random_connection(3, LieAlgebra(GroupKind.U1), seed=1, amplitude=0.2)
        with self.assertRaises(NearReducible) as ctx:
            taubes_deform(A)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_outside_basin(self):
        A = _offset_connection(3, self.su2, 2, 0.05, 0.3)
        with self.assertRaises(NoContraction) as ctx:
            taubes_deform(A, DeformConfig(rho_max=1e-3))
        self.assertEqual(ctx.exception.exit_code, 4)
        self.assertIn("trace_norm", ctx.exception.details)

    def test_picard_needs_outer_steps(self):
        A = _offset_connection(3, self.su2, 2, 0.05, 0.3)
        with self.assertRaises(NoContraction):
            taubes_deform(A, DeformConfig(mode="PaperPicard", max_outer=1))

    def test_picard_decays_geometrically(self):
        cfg = DeformConfig(mode="PaperPicard", max_outer=100)
        results = [taubes_deform(_kahler_connection(3, self.su2, 1, amplitude), cfg) for amplitude in (0.01, 0.005)]
        for result in results:
            fit = result.decay_fit
            self.assertGreaterEqual(fit["r_squared"], 0.95)
            self.assertLess(fit["rate"], 1.0)
            self.assertLessEqual(result.trace_norms[-1], cfg.tol)
        self.assertLessEqual(results[1].trace_norms[1], 0.5 * results[0].trace_norms[1])

    def test_modes_agree(self):
        A = _kahler_connection(4, self.su2, 2, 0.01)
        picard = taubes_deform(A, DeformConfig(mode="PaperPicard", max_outer=100))
        residual = taubes_deform(A, DeformConfig(mode="DiscreteResidual"))
        self.assertLessEqual(residual.final_residual, 1e-8)
        self.assertLess(l2_norm(picard.s.data - residual.s.data) / l2_norm(residual.s), 0.5)

    def test_background_trace_vanishes(self):
        A = kahler_background(3, self.su2, 0.3)
        self.assertEqual(taubes_deform(A).iterations, 1)
        with self.assertRaises(UsageError):
            kahler_background(3, LieAlgebra(GroupKind.U1), 0.3)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            DeformConfig(mode="Newton")
        with self.assertRaises(ConfigError):
            DeformConfig(rho_max=1.5)
        with self.assertRaises(ConfigError):
            DeformConfig(correction="central")
        self.assertEqual(DeformConfig(lambda_floor=0.05).spectral.lambda_floor, 0.05)
        self.assertIs(DeformMode.parse("paperpicard"), DeformMode.PAPER_PICARD)

    def test_estimates_on_zero_input(self):
        A = _offset_connection(3, self.su2, 3, 0.05, 0.3)
        zero = LatticeForm.zeros(3, 0, 3)
        self.assertEqual(laplace_estimates(A, zero), {"s_sobolev_ratio": 0.0, "bilinear_ratio": 0.0})
        self.assertEqual(bilinear_estimate(A, zero, zero), 0.0)


class TestGeometricFit(unittest.TestCase):

    def test_exact_geometric_sequence(self):
        norms = [0.2 * 0.5 ** k for k in range(6)]
        fit = fit_geometric_decay(norms, rho=0.2)
        self.assertAlmostEqual(fit["rate"], 0.5, places=12)
        self.assertAlmostEqual(fit["c_hat"], 0.2, places=12)
        self.assertAlmostEqual(fit["q"], 2.5, places=10)
        self.assertAlmostEqual(fit["r_squared"], 1.0, places=12)

    def test_short_sequence(self):
        fit = fit_geometric_decay([1.0, 0.0, 0.5])
        self.assertEqual(fit["points"], 2)
        self.assertIsNone(fit["rate"])


class TestGradientFlow(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.A = random_connection(3, self.su2, seed=4, amplitude=0.3)

    def test_energy_decreases(self):
        for method in ("cg", "descent"):
            result = ym_gradient_flow(self.A, FlowConfig(max_steps=20, method=method))
            self.assertEqual(len(result.energies), result.steps + 1)
            self.assertTrue(np.all(np.diff(result.energies) <= 0.0), method)
            self.assertLess(result.energies[-1], result.energies[0])

    def test_conjugate_gradient_reaches_tolerance(self):
        A = random_connection(4, self.su2, seed=7, amplitude=0.3)
        result = ym_gradient_flow(A, FlowConfig(grad_tol=1e-6, max_steps=3000))
        self.assertTrue(result.converged)
        self.assertLessEqual(result.grad_norms[-1], 1e-6)
        self.assertLessEqual(result.energies[-1], result.energies[0])

    def test_descent_step_grows(self):
        cfg = FlowConfig(method="descent", max_steps=40, grad_tol=1e-12)
        plain = ym_gradient_flow(self.A, FlowConfig(method="descent", max_steps=40, grad_tol=1e-12, growth=1.0))
        grown = ym_gradient_flow(self.A, cfg)
        self.assertLess(grown.energies[-1], plain.energies[-1])
        self.assertEqual(plain.rejections, 0)

    def test_rejected_step_without_backtracking(self):
        with self.assertRaises(StepRejectionLimit) as ctx:
            ym_gradient_flow(self.A, FlowConfig(dt=10.0, backtracking=False, max_steps=5, method="descent"))
        self.assertEqual(ctx.exception.exit_code, 5)

    def test_flat_connection_is_stationary(self):
        result = ym_gradient_flow(Connection.zeros(3, self.su2))
        self.assertTrue(result.converged)
        self.assertEqual(result.steps, 0)
        report = harmonicity_report(result.A)
        self.assertEqual(set(report), {
            "yang_mills", "dbar_star_f02", "kahler_02", "kahler_20", "trace", "fplus", "f02",
            "f_d", "f_d_star", "f_dbar_star",
        })
        self.assertTrue(all(value == 0.0 for value in report.values()))

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            FlowConfig(dt=-1.0)
        with self.assertRaises(ConfigError):
            FlowConfig(method="newton")
        with self.assertRaises(ConfigError):
            FlowConfig(growth=0.5)
        self.assertAlmostEqual(FlowConfig().step_for(0.25), 0.00625)
        self.assertIs(FlowConfig(method="descent").method, FlowMethod.DESCENT)


class TestLineSearch(unittest.TestCase):

    def test_energy_along_is_exact(self):
        su2 = LieAlgebra(GroupKind.SU2)
        A = random_connection(3, su2, seed=1, amplitude=0.4)
        p = random_form(3, 1, su2, seed=2, amplitude=0.3)
        coeffs = energy_along(A, curvature(A), p)
        for alpha in (0.0, 0.7, -1.3):
            self.assertAlmostEqual(np.polyval(coeffs, alpha), ym_energy(A.shifted(p * alpha)), places=9)

    def test_exact_line_step(self):
        self.assertAlmostEqual(exact_line_step(np.array([0.0, 0.0, 1.0, -2.0, 3.0])), 1.0, places=12)
        self.assertAlmostEqual(exact_line_step(np.array([1.0, 0.0, 0.0, -4.0, 0.0])), 1.0, places=10)
        self.assertIsNone(exact_line_step(np.array([1.0, 0.0, 1.0, 0.5, 0.0])))


if __name__ == '__main__':
    unittest.main()
