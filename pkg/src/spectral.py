import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg, lobpcg

from errors import ConfigError, NearReducible, NonConvergence, SolverStagnation, UsageError
from gauge_fields import Connection, delbar, delbar_star, nabla, nabla_star
from lattice_geometry import DIMENSION, PQ_BASIS, LatticeForm, PQForm, lp_norm
from utils import array_digest

# Configure Logging
logger = logging.getLogger(__name__)

# Unit (0, 2) covector dzbar1 ^ dzbar2 / 2 in the real coframe basis.
NU = PQ_BASIS[(0, 2)][:, 0] / 2.0

# Allowed drift of the recomputed CG residual over the recurrence estimate.
RESIDUAL_SLACK = 10.0

ApplyFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class SpectralConfig:
    tol: float = 1e-8
    max_iter: int = 500
    cg_tol: float = 1e-10
    cg_max_iter: int = 5000
    restarts: int = 8
    lambda_floor: float = 1e-3
    shift: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name == "seed":
                continue
            if value is None or value <= 0:
                raise ConfigError(f"spectral.{name} must be positive, got {value}")


@dataclass
class EigenResult:
    value: float
    witness: np.ndarray
    iterations: int
    residual: float

    def witness_form(self) -> LatticeForm:
        return LatticeForm.scalar(self.witness)

    def to_payload(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "residual": self.residual,
            "witness_digest": array_digest(self.witness),
        }


@dataclass
class MuResult(EigenResult):
    """Constrained minimum over rank-one phi = f (x) sigma plus the unconstrained bound."""

    unconstrained_value: float = 0.0
    unconstrained_residual: float = 0.0
    sigma: Optional[np.ndarray] = None
    restart_values: List[float] = field(default_factory=list)

    def witness_form(self) -> PQForm:
        return rank_one_form(self.witness, self.sigma)

    def to_payload(self) -> Dict[str, Any]:
        payload = super().to_payload()
        payload.update({
            "unconstrained_value": self.unconstrained_value,
            "unconstrained_residual": self.unconstrained_residual,
            "restart_values": list(self.restart_values),
        })
        return payload


# Operators on flat vectors

def laplace_operator(A: Connection) -> Tuple[ApplyFn, int]:
    """nabla_A* nabla_A on 0-forms as a map on flat real vectors."""
    shape = (A.n,) * DIMENSION + (1, A.algebra.dim)

    def apply(x: np.ndarray) -> np.ndarray:
        u = np.asarray(x).reshape(shape)
        return nabla_star(nabla(u, A), A).reshape(-1)

    return apply, int(np.prod(shape))


def coefficient_form(c: np.ndarray) -> PQForm:
    """phi = c nu for c of shape (n, n, n, n, dim)."""
    return PQForm.of(0, 2, NU[:, None] * np.asarray(c, dtype=complex)[..., None, :])


def rank_one_form(f: np.ndarray, sigma: np.ndarray) -> PQForm:
    return coefficient_form(np.asarray(f)[..., None] * sigma)


def form_coefficient(phi: LatticeForm) -> np.ndarray:
    """Coordinate of a (0, 2)-form on the unit covector nu, shape (n, n, n, n, dim)."""
    return np.einsum("i,...ia->...a", NU.conj(), phi.data)


def dbar_dbar_star(A: Connection) -> Callable[[np.ndarray], np.ndarray]:
    """c -> coefficient of delbar_A delbar_A* (c nu); Hermitian and positive semidefinite."""

    def apply(c: np.ndarray) -> np.ndarray:
        phi = coefficient_form(c)
        return form_coefficient(delbar(delbar_star(phi, A), A))

    return apply


def _realify(apply_complex: Callable[[np.ndarray], np.ndarray], shape: Tuple[int, ...]) -> Tuple[ApplyFn, int]:
    size = int(np.prod(shape))

    def apply(z: np.ndarray) -> np.ndarray:
        c = (z[:size] + 1j * z[size:]).reshape(shape)
        out = apply_complex(c).reshape(-1)
        return np.concatenate([out.real, out.imag])

    return apply, 2 * size


def _complexify(z: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    size = int(np.prod(shape))
    return (z[:size] + 1j * z[size:]).reshape(shape)


def _as_operator(apply: ApplyFn, size: int, shift: float = 0.0) -> LinearOperator:
    if shift:
        return LinearOperator((size, size), matvec=lambda x: apply(np.ravel(x)) + shift * np.ravel(x), dtype=float)
    return LinearOperator((size, size), matvec=lambda x: apply(np.ravel(x)), dtype=float)


def _cg_solve(operator: LinearOperator, rhs: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    solution, info = cg(operator, rhs, rtol=cfg.cg_tol, maxiter=cfg.cg_max_iter)
    if info != 0:
        raise SolverStagnation(
            f"Conjugate gradient stopped without reaching rtol={cfg.cg_tol} (info={info})",
            {"cg_info": int(info), "cg_max_iter": cfg.cg_max_iter},
        )
    return solution


def inverse_subspace_iteration(
    apply: ApplyFn, size: int, block: int, cfg: SpectralConfig, rng: np.random.Generator,
    label: str = "eigen",
) -> Tuple[float, np.ndarray, int, float]:
    """
    Smallest eigenpair of a symmetric positive semidefinite operator.

    Block inverse iteration on (Op + shift I) with CG inner solves and a
    Rayleigh-Ritz step each sweep. The block must exceed the multiplicity of
    the smallest eigenvalue for the sweep to converge quickly.
    """
    shifted = _as_operator(apply, size, cfg.shift)
    X = rng.standard_normal((size, block))
    X, _ = scipy.linalg.qr(X, mode="economic")
    residual = np.inf
    for iteration in range(1, cfg.max_iter + 1):
        Y = np.column_stack([_cg_solve(shifted, X[:, j], cfg) for j in range(block)])
        Q, _ = scipy.linalg.qr(Y, mode="economic")
        LQ = np.column_stack([apply(Q[:, j]) for j in range(block)])
        H = Q.T @ LQ
        theta, W = scipy.linalg.eigh(0.5 * (H + H.T))
        X = Q @ W
        LX = LQ @ W
        residual = float(np.linalg.norm(LX[:, 0] - theta[0] * X[:, 0]))
        logger.debug(f"{label} sweep {iteration}: value={theta[0]:.12e} residual={residual:.3e}")
        if residual <= cfg.tol:
            return float(theta[0]), X[:, 0], iteration, residual
    raise SolverStagnation(
        f"{label} iteration did not reach tol={cfg.tol} in {cfg.max_iter} sweeps",
        {"residual": residual, "max_iter": cfg.max_iter},
    )


# lambda(A)

def lambda_A(A: Connection, cfg: Optional[SpectralConfig] = None) -> EigenResult:
    """
    Least eigenvalue of d_A* d_A = nabla_A* nabla_A on Lie-algebra-valued 0-forms.

    Args:
        A: Connection on the adjoint bundle.
        cfg: Eigen tolerance, sweep limit and seed. Defaults to SpectralConfig().

    Returns:
        EigenResult holding the value, a unit witness section, the sweep count
        and the final eigen-residual.
    """
    cfg = cfg or SpectralConfig()
    apply, size = laplace_operator(A)
    rng = np.random.default_rng(cfg.seed)
    value, vector, iterations, residual = inverse_subspace_iteration(
        apply, size, A.algebra.dim + 1, cfg, rng, label="lambda"
    )
    witness = vector.reshape((A.n,) * DIMENSION + (A.algebra.dim,))
    logger.info(f"lambda(A) = {value:.6e} after {iterations} sweeps (residual {residual:.2e})")
    return EigenResult(value, witness, iterations, residual)


def solve_laplace(
    A: Connection, f: LatticeForm, cfg: Optional[SpectralConfig] = None,
    lam: Optional[EigenResult] = None, check: bool = True,
) -> LatticeForm:
    """
    Solves nabla_A* nabla_A s = f by conjugate gradients.

    With check=True the operator is first certified invertible: lambda(A) is
    computed (or taken from lam) and compared with cfg.lambda_floor.

    Raises:
        NearReducible: lambda(A) is below cfg.lambda_floor.
        SolverStagnation: CG stopped early or its recomputed residual exceeds
            cg_tol ||f|| by more than RESIDUAL_SLACK.
    """
    cfg = cfg or SpectralConfig()
    if f.degree != 0:
        raise UsageError(f"solve_laplace expects a 0-form, got degree {f.degree}")
    rhs = f.data.reshape(-1)
    if not np.any(rhs):
        return LatticeForm(0, np.zeros_like(f.data))
    if check:
        lam = lam or lambda_A(A, cfg)
        if lam.value < cfg.lambda_floor:
            raise NearReducible(
                f"lambda(A)={lam.value:.3e} is below the floor {cfg.lambda_floor:.1e}",
                {"lambda": lam.value, "lambda_floor": cfg.lambda_floor},
            )
    apply, size = laplace_operator(A)
    if np.iscomplexobj(rhs):
        operator = _as_operator(apply, size)
        solution = _cg_solve(operator, rhs.real, cfg) + 1j * _cg_solve(operator, rhs.imag, cfg)
    else:
        solution = _cg_solve(_as_operator(apply, size), rhs, cfg)
    true_residual = float(np.linalg.norm(apply(solution.real) + 1j * apply(np.imag(solution)) - rhs))
    bound = RESIDUAL_SLACK * cfg.cg_tol * float(np.linalg.norm(rhs))
    logger.debug(f"solve_laplace residual {true_residual:.3e} (|f|={np.linalg.norm(rhs):.3e})")
    if true_residual > bound:
        raise SolverStagnation(
            f"solve_laplace residual {true_residual:.3e} exceeds {bound:.3e}",
            {"true_residual": true_residual, "bound": bound, "cg_tol": cfg.cg_tol},
        )
    return LatticeForm(0, solution.reshape(f.data.shape))


# mu(A)

def mu_unconstrained(A: Connection, cfg: Optional[SpectralConfig] = None) -> EigenResult:
    """Least eigenvalue of delbar_A delbar_A* on all of Omega^{0,2}."""
    cfg = cfg or SpectralConfig()
    shape = (A.n,) * DIMENSION + (A.algebra.dim,)
    apply, size = _realify(dbar_dbar_star(A), shape)
    rng = np.random.default_rng(cfg.seed + 1)
    value, vector, iterations, residual = inverse_subspace_iteration(
        apply, size, 2 * A.algebra.dim + 2, cfg, rng, label="mu-unconstrained"
    )
    return EigenResult(value, _complexify(vector, shape), iterations, residual)


def _preconditioner(n: int, shift: float) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse of a flat shifted Laplacian on complex scalar fields, applied by FFT."""
    h = 1.0 / n
    k = np.arange(n)
    axis_symbol = (2.0 * np.sin(np.pi * k / n) / h) ** 2
    grids = np.meshgrid(axis_symbol, axis_symbol, axis_symbol, axis_symbol, indexing="ij")
    symbol = 0.5 * sum(grids) + shift
    shape = (n,) * DIMENSION

    def apply(z: np.ndarray) -> np.ndarray:
        c = _complexify(np.ravel(z), shape)
        out = np.fft.ifftn(np.fft.fftn(c) / symbol).reshape(-1)
        return np.concatenate([out.real, out.imag])

    return apply


def _sigma_operator(apply_c: Callable[[np.ndarray], np.ndarray], sigma: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """f -> sigma . M(f sigma), the Rayleigh operator at fixed sigma."""

    def apply(f: np.ndarray) -> np.ndarray:
        return np.sum(sigma * apply_c(f[..., None] * sigma), axis=-1)

    return apply


def _quadratic(apply_c: Callable[[np.ndarray], np.ndarray], f: np.ndarray, sigma: np.ndarray) -> float:
    c = f[..., None] * sigma
    return float(np.real(np.vdot(c, apply_c(c))))


def _normalize_sections(sigma: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(sigma, axis=-1, keepdims=True)
    return sigma / np.where(norms > 0, norms, 1.0)


def _f_step(apply_c, sigma: np.ndarray, f: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    shape = f.shape
    apply, size = _realify(_sigma_operator(apply_c, sigma), shape)
    operator = _as_operator(apply, size)
    precond = LinearOperator((size, size), matvec=_preconditioner(shape[0], cfg.shift), dtype=float)
    start = np.column_stack([
        np.concatenate([f.real.ravel(), f.imag.ravel()]),
        np.concatenate([-f.imag.ravel(), f.real.ravel()]),
    ])
    _, vectors = lobpcg(operator, start, M=precond, tol=cfg.tol, maxiter=min(cfg.max_iter, 200), largest=False)
    f_new = _complexify(vectors[:, 0], shape)
    return f_new / np.linalg.norm(f_new)


def _sigma_step(apply_c, sigma: np.ndarray, f: np.ndarray, value: float, max_steps: int = 10) -> Tuple[np.ndarray, float]:
    """Projected gradient with Armijo backtracking on the unit-sphere bundle."""
    for _ in range(max_steps):
        grad = 2.0 * np.real(np.conj(f)[..., None] * apply_c(f[..., None] * sigma))
        tangent = grad - np.sum(grad * sigma, axis=-1, keepdims=True) * sigma
        slope = float(np.sum(tangent ** 2))
        peak = float(np.max(np.linalg.norm(tangent, axis=-1)))
        if peak <= 1e-14:
            break
        tau = 0.5 / peak
        accepted = False
        for _ in range(30):
            trial = _normalize_sections(sigma - tau * tangent)
            trial_value = _quadratic(apply_c, f, trial)
            if trial_value <= value - 1e-4 * tau * slope:
                sigma, value, accepted = trial, trial_value, True
                break
            tau *= 0.5
        if not accepted:
            break
    return sigma, value


def _alternating_minimization(
    apply_c, f: np.ndarray, sigma: np.ndarray, cfg: SpectralConfig, label: str,
) -> Tuple[float, np.ndarray, np.ndarray, int]:
    f = f / np.linalg.norm(f)
    value = _quadratic(apply_c, f, sigma)
    for iteration in range(1, cfg.max_iter + 1):
        previous = value
        candidate = _f_step(apply_c, sigma, f, cfg)
        candidate_value = _quadratic(apply_c, candidate, sigma)
        if candidate_value <= value:
            f, value = candidate, candidate_value
        sigma, value = _sigma_step(apply_c, sigma, f, value)
        logger.debug(f"{label} iteration {iteration}: value={value:.12e}")
        if previous - value <= cfg.tol * max(1.0, abs(value)):
            return value, f, sigma, iteration
    raise NonConvergence(f"{label} alternating minimization hit max_iter={cfg.max_iter}", {"value": value})


def mu_A(A: Connection, cfg: Optional[SpectralConfig] = None) -> MuResult:
    """
    mu(A) over rank-one (0, 2)-forms phi = f (x) sigma by alternating minimization.

    Restart r starts from the constant section e_r (for r < dim) and from
    random unit sections afterwards. Failed restarts are logged; only a run
    in which every restart fails raises NonConvergence.

    Args:
        A: Connection whose delbar_A delbar_A* is minimised.
        cfg: Tolerances, restart count and seed. Defaults to SpectralConfig().

    Returns:
        MuResult with the constrained value, its f and sigma witness and the
        unconstrained lower bound.
    """
    cfg = cfg or SpectralConfig()
    unconstrained = mu_unconstrained(A, cfg)
    n, dim = A.n, A.algebra.dim
    site_shape = (n,) * DIMENSION

    if A.kind.abelian:
        coeff = unconstrained.witness[..., 0]
        sigma = np.ones(site_shape + (1,))
        return MuResult(
            unconstrained.value, coeff, unconstrained.iterations, unconstrained.residual,
            unconstrained.value, unconstrained.residual, sigma, [unconstrained.value],
        )

    apply_c = dbar_dbar_star(A)
    rng = np.random.default_rng(cfg.seed + 2)
    best: Optional[Tuple[float, np.ndarray, np.ndarray, int]] = None
    restart_values: List[float] = []
    failures = 0
    for restart in range(cfg.restarts):
        f0 = rng.standard_normal(site_shape) + 1j * rng.standard_normal(site_shape)
        if restart < dim:
            sigma0 = np.zeros(site_shape + (dim,))
            sigma0[..., restart] = 1.0
        else:
            sigma0 = _normalize_sections(rng.standard_normal(site_shape + (dim,)))
        try:
            outcome = _alternating_minimization(apply_c, f0, sigma0, cfg, f"mu restart {restart}")
        except NonConvergence as e:
            failures += 1
            logger.warning(f"mu(A) restart {restart} failed: {e.message}")
            continue
        restart_values.append(outcome[0])
        if best is None or outcome[0] < best[0]:
            best = outcome
    if best is None:
        raise NonConvergence(f"All {cfg.restarts} mu(A) restarts failed", {"restarts": cfg.restarts})

    value, f, sigma, iterations = best
    # Stationarity in f at the final section.
    residual = float(np.linalg.norm(_sigma_operator(apply_c, sigma)(f) - value * f))
    spread = max(restart_values) - min(restart_values)
    if spread > 1e-6:
        logger.warning(f"mu(A) restarts disagree by {spread:.3e}; reporting the minimum")
    logger.info(
        f"mu(A) = {value:.6e} (unconstrained {unconstrained.value:.6e}), "
        f"{len(restart_values)}/{cfg.restarts} restarts converged"
    )
    return MuResult(
        value, f, iterations, residual,
        unconstrained.value, unconstrained.residual, sigma, restart_values,
    )


# Dense oracles and certificates

def assemble_dense(apply: Callable[[np.ndarray], np.ndarray], size: int, dtype=float) -> np.ndarray:
    """Matrix of a linear map by applying it to the unit vectors."""
    matrix = np.zeros((size, size), dtype=dtype)
    unit = np.zeros(size, dtype=dtype)
    for j in range(size):
        unit[j] = 1.0
        matrix[:, j] = np.ravel(apply(unit))
        unit[j] = 0.0
    return matrix


def dense_lambda(A: Connection) -> float:
    apply, size = laplace_operator(A)
    matrix = assemble_dense(apply, size)
    return float(scipy.linalg.eigh(0.5 * (matrix + matrix.T), eigvals_only=True)[0])


def dense_mu_unconstrained(A: Connection) -> float:
    shape = (A.n,) * DIMENSION + (A.algebra.dim,)
    apply_c = dbar_dbar_star(A)
    matrix = assemble_dense(lambda c: apply_c(c.reshape(shape)), int(np.prod(shape)), dtype=complex)
    return float(scipy.linalg.eigh(0.5 * (matrix + matrix.conj().T), eigvals_only=True)[0])


def rayleigh_quotient(apply: Callable[[np.ndarray], np.ndarray], v: np.ndarray) -> float:
    v = np.asarray(v)
    return float(np.real(np.vdot(v, apply(v))) / np.real(np.vdot(v, v)))


def rayleigh_certificate(
    apply: Callable[[np.ndarray], np.ndarray], result: EigenResult, samples: int = 100, seed: int = 0,
) -> Dict[str, float]:
    """
    Checks that result.value is the witness Rayleigh quotient and does not
    exceed the quotient of any random field.
    """
    witness = np.asarray(result.witness)
    quotient = rayleigh_quotient(lambda v: apply(v.reshape(witness.shape)).reshape(v.shape), witness.reshape(-1))
    rng = np.random.default_rng(seed)
    sample_min = np.inf
    for _ in range(samples):
        trial = rng.standard_normal(witness.size)
        if np.iscomplexobj(witness):
            trial = trial + 1j * rng.standard_normal(witness.size)
        sample_min = min(sample_min, rayleigh_quotient(lambda v: apply(v.reshape(witness.shape)).reshape(v.shape), trial))
    return {
        "quotient": quotient,
        "value_gap": abs(quotient - result.value),
        "sample_min": float(sample_min),
        "below_samples": bool(result.value <= sample_min + 1e-12),
    }


# Continuity

@dataclass
class ContinuityRow:
    t: float
    a_l4: float
    lam: float
    mu: float
    d_lambda: float
    d_mu: float

    def to_row(self) -> Dict[str, float]:
        return {
            "t": self.t, "a_l4": self.a_l4, "lambda": self.lam, "mu": self.mu,
            "d_lambda": self.d_lambda, "d_mu": self.d_mu,
        }


def continuity_sweep(
    A0: Connection, direction: LatticeForm, amplitudes: Sequence[float], cfg: Optional[SpectralConfig] = None,
) -> List[ContinuityRow]:
    """
    lambda and mu along A0 + t * direction for ascending t.

    Args:
        A0: Base connection.
        direction: Real 1-form added with weight t.
        amplitudes: Ascending ladder of t values; t = 0 reuses the base values.
        cfg: Spectral settings shared by every point.

    Returns:
        One ContinuityRow per t with |lambda(A_t) - lambda(A0)| and
        |mu(A_t) - mu(A0)|.

    Raises:
        UsageError: amplitudes are not ascending or direction is not a 1-form.
    """
    cfg = cfg or SpectralConfig()
    amplitudes = [float(t) for t in amplitudes]
    if any(b < a for a, b in zip(amplitudes, amplitudes[1:])):
        raise UsageError(f"Continuity amplitudes must be sorted ascending, got {amplitudes}")
    if direction.degree != 1:
        raise UsageError("Continuity direction must be a 1-form")

    base_lambda = lambda_A(A0, cfg).value
    base_mu = mu_A(A0, cfg).value
    rows = []
    for t in amplitudes:
        if t == 0:
            lam, mu = base_lambda, base_mu
        else:
            At = A0.shifted(direction * t)
            lam, mu = lambda_A(At, cfg).value, mu_A(At, cfg).value
        a_l4 = lp_norm(direction * t, 4.0, A0.algebra)
        rows.append(ContinuityRow(t, a_l4, lam, mu, abs(lam - base_lambda), abs(mu - base_mu)))
        logger.info(f"continuity t={t:.4g}: lambda={lam:.6e} mu={mu:.6e}")
    return rows
