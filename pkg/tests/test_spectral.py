import unittest
import os
import sys
from unittest import mock

import numpy as np

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from errors import ConfigError, NearReducible, SolverStagnation, UsageError
from gauge_fields import Connection, constant_connection, random_connection, random_form
from lattice_geometry import LatticeForm
from lie_algebra import GroupKind, LieAlgebra
from spectral import (
    SpectralConfig, coefficient_form, continuity_sweep, dense_lambda, dense_mu_unconstrained,
    form_coefficient, lambda_A, laplace_operator, mu_A, mu_unconstrained, rank_one_form,
    rayleigh_certificate, solve_laplace,
)


def _offset_connection(n, algebra, seed, amplitude, strength):
    """Random field on top of a constant noncommuting one, which keeps lambda(A) off zero."""
    base = constant_connection(n, algebra, strength).potential
    return Connection.from_potential(base + random_connection(n, algebra, seed, amplitude).potential, algebra)


class TestLambda(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.A = _offset_connection(3, self.su2, 0, 0.1, 0.3)

    def test_flat_connection_has_zero_lambda(self):
        result = lambda_A(Connection.zeros(3, self.su2))
        self.assertAlmostEqual(result.value, 0.0, places=10)
        self.assertLessEqual(result.residual, SpectralConfig().tol)

    def test_matches_dense_oracle(self):
        result = lambda_A(self.A)
        self.assertGreater(result.value, 1e-3)
        self.assertAlmostEqual(result.value, dense_lambda(self.A), places=6)

    def test_rayleigh_certificate(self):
        result = lambda_A(self.A)
        apply, _ = laplace_operator(self.A)
        cert = rayleigh_certificate(lambda v: apply(v.reshape(-1)), result, samples=20)
        self.assertLess(cert["value_gap"], 1e-7)
        self.assertTrue(cert["below_samples"])

    def test_u1_is_reducible(self):
        A = random_connection(3, LieAlgebra(GroupKind.U1), seed=1, amplitude=0.5)
        self.assertAlmostEqual(lambda_A(A).value, 0.0, places=10)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            SpectralConfig(tol=0.0)
        with self.assertRaises(ConfigError):
            SpectralConfig(restarts=-1)


class TestSolveLaplace(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.A = _offset_connection(3, self.su2, 2, 0.1, 0.3)

    def test_solution_satisfies_equation(self):
        f = random_form(3, 0, self.su2, seed=3)
        s = solve_laplace(self.A, f)
        apply, _ = laplace_operator(self.A)
        residual = np.linalg.norm(apply(s.data.reshape(-1)) - f.data.reshape(-1))
        self.assertLessEqual(residual, 1e-7 * np.linalg.norm(f.data))

    def test_zero_right_hand_side(self):
        zero = LatticeForm.zeros(3, 0, 3)
        np.testing.assert_array_equal(solve_laplace(self.A, zero).data, 0.0)

    def test_near_reducible_refused(self):
        f = random_form(3, 0, self.su2, seed=4)
        with self.assertRaises(NearReducible) as ctx:
            solve_laplace(Connection.zeros(3, self.su2), f)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_degree_checked(self):
        with self.assertRaises(UsageError):
            solve_laplace(self.A, LatticeForm.zeros(3, 1, 3))

    def test_stalled_solve_is_reported(self):
        f = random_form(3, 0, self.su2, seed=5)
        with self.assertRaises(SolverStagnation) as ctx:
            solve_laplace(self.A, f, SpectralConfig(cg_max_iter=1))
        self.assertEqual(ctx.exception.exit_code, 5)

    def test_inaccurate_solution_is_reported(self):
        f = random_form(3, 0, self.su2, seed=5)
        with mock.patch("spectral.cg", side_effect=lambda op, rhs, **kwargs: (np.zeros_like(rhs), 0)):
            with self.assertRaises(SolverStagnation) as ctx:
                solve_laplace(self.A, f, check=False)
        self.assertGreater(ctx.exception.details["true_residual"], ctx.exception.details["bound"])


class TestMu(unittest.TestCase):

    def setUp(self):
        self.su2 = LieAlgebra(GroupKind.SU2)
        self.cfg = SpectralConfig(tol=1e-7, restarts=3)

    def test_coefficient_round_trip(self):
        c = np.random.default_rng(5).standard_normal((3, 3, 3, 3, 3)) * (1 + 0.5j)
        phi = coefficient_form(c)
        self.assertEqual(phi.bidegree, (0, 2))
        np.testing.assert_allclose(form_coefficient(phi), c, atol=1e-12)

    def test_unconstrained_matches_dense_oracle(self):
        A = _offset_connection(3, self.su2, 6, 0.3, 0.3)
        result = mu_unconstrained(A)
        self.assertAlmostEqual(result.value, dense_mu_unconstrained(A), places=6)

    def test_flat_connection(self):
        A = Connection.zeros(3, self.su2)
        result = mu_A(A, self.cfg)
        self.assertAlmostEqual(result.unconstrained_value, 0.0, places=8)
        self.assertAlmostEqual(result.value, 0.0, places=6)
        self.assertEqual(result.witness_form().bidegree, (0, 2))

    def test_rank_one_bound(self):
        A = _offset_connection(3, self.su2, 7, 0.3, 0.3)
        result = mu_A(A, self.cfg)
        self.assertGreaterEqual(result.value, result.unconstrained_value - 1e-8)
        np.testing.assert_allclose(np.linalg.norm(result.sigma, axis=-1), 1.0, atol=1e-12)
        phi = rank_one_form(result.witness, result.sigma)
        self.assertEqual(phi.data.shape, (3, 3, 3, 3, 6, 3))

    def test_u1_equals_unconstrained(self):
        A = random_connection(3, LieAlgebra(GroupKind.U1), seed=8, amplitude=0.5)
        result = mu_A(A)
        self.assertEqual(result.value, result.unconstrained_value)


class TestContinuity(unittest.TestCase):

    def setUp(self):
        self.u1 = LieAlgebra(GroupKind.U1)
        self.A0 = random_connection(3, self.u1, seed=0, amplitude=0.2)
        self.direction = random_form(3, 1, self.u1, seed=1)

    def test_sweep_rows(self):
        rows = continuity_sweep(self.A0, self.direction, [0.0, 0.1])
        self.assertEqual([row.t for row in rows], [0.0, 0.1])
        self.assertEqual(rows[0].d_lambda, 0.0)
        self.assertEqual(rows[0].a_l4, 0.0)
        self.assertGreater(rows[1].a_l4, 0.0)
        # Abelian connections act trivially on the adjoint bundle.
        self.assertAlmostEqual(rows[1].lam, 0.0, places=8)
        self.assertEqual(set(rows[1].to_row()), {"t", "a_l4", "lambda", "mu", "d_lambda", "d_mu"})

    def test_sweep_validation(self):
        with self.assertRaises(UsageError):
            continuity_sweep(self.A0, self.direction, [0.1, 0.0])
        with self.assertRaises(UsageError):
            continuity_sweep(self.A0, LatticeForm.zeros(3, 2, 1), [0.0])

    def test_su2_ladder_is_monotone(self):
        su2 = LieAlgebra(GroupKind.SU2)
        A0 = _offset_connection(3, su2, 3, 0.1, 0.3)
        direction = random_form(3, 1, su2, seed=4, amplitude=0.5)
        rows = continuity_sweep(A0, direction, [0.0, 0.0125, 0.025, 0.05, 0.1, 0.2])
        d_lambda = [row.d_lambda for row in rows]
        d_mu = [row.d_mu for row in rows]
        self.assertEqual(d_lambda[0], 0.0)
        self.assertGreater(d_lambda[-1], 0.0)
        self.assertTrue(all(a <= b for a, b in zip(d_lambda, d_lambda[1:])), d_lambda)
        self.assertTrue(all(a <= b for a, b in zip(d_mu, d_mu[1:])), d_mu)


if __name__ == '__main__':
    unittest.main()
