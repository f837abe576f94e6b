import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Union

import numpy as np
from scipy.stats import linregress

from errors import ConfigError, NearReducible, NoContraction, StepRejectionLimit, UsageError
from gauge_fields import (
    Connection, curvature, dA, dA_star, del_, delbar, nabla, sobolev_norm, ym_energy, yang_mills_gradient,
)
from lattice_geometry import (
    MULTI_INDICES, LatticeForm, _wedge_tensor, l2_inner, l2_norm, lambda_omega, lomega, lp_norm,
    pointwise_norm_sq, pq_project,
)
from spectral import EigenResult, SpectralConfig, lambda_A, solve_laplace

# Configure Logging
logger = logging.getLogger(__name__)

# |B(u, v)| <= BMAP_CONSTANT |nabla_A u| |nabla_A v| pointwise.
BMAP_CONSTANT = 0.5
STALL_LIMIT = 5


class DeformMode(Enum):
    PAPER_PICARD = "PaperPicard"
    DISCRETE_RESIDUAL = "DiscreteResidual"

    @classmethod
    def parse(cls, value: Union[str, "DeformMode"]) -> "DeformMode":
        if isinstance(value, DeformMode):
            return value
        for mode in cls:
            if mode.value.lower() == str(value).lower():
                return mode
        raise ConfigError(f"Unknown deform mode {value!r} (expected PaperPicard or DiscreteResidual)")


@dataclass
class DeformConfig:
    mode: Union[str, DeformMode] = DeformMode.DISCRETE_RESIDUAL
    tol: float = 1e-8
    max_outer: int = 50
    rho_max: float = 0.5
    lambda_floor: float = 1e-4
    correction: str = "adjoint"
    f02_p: float = 4.0
    spectral: SpectralConfig = field(default_factory=SpectralConfig)

    def __post_init__(self):
        self.mode = DeformMode.parse(self.mode)
        if self.tol <= 0:
            raise ConfigError(f"deform.tol must be positive, got {self.tol}")
        if not 0 < self.rho_max <= 1:
            raise ConfigError(f"deform.rho_max must lie in (0, 1], got {self.rho_max}")
        if self.max_outer < 1:
            raise ConfigError(f"deform.max_outer must be >= 1, got {self.max_outer}")
        if self.correction not in ("adjoint", "dolbeault"):
            raise ConfigError(f"deform.correction must be 'adjoint' or 'dolbeault', got {self.correction!r}")
        # The deformation floor governs the Laplace solves it issues.
        self.spectral = replace(self.spectral, lambda_floor=self.lambda_floor)


@dataclass
class DeformResult:
    s: LatticeForm
    A_inf: Connection
    trace_norms: List[float]
    final_residual: float
    s_norm_ratio: float
    mode: DeformMode
    iterations: int
    lam: float
    f02_shift: float = 0.0
    f02_shift_ratio: float = 0.0
    decay_fit: Dict[str, Any] = field(default_factory=dict)

    def to_payload(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "iterations": self.iterations,
            "trace_norms": list(self.trace_norms),
            "final_residual": self.final_residual,
            "s_norm_ratio": self.s_norm_ratio,
            "lambda": self.lam,
            "f02_shift": self.f02_shift,
            "f02_shift_ratio": self.f02_shift_ratio,
            "decay_fit": dict(self.decay_fit),
        }


class FlowMethod(Enum):
    DESCENT = "descent"
    CONJUGATE_GRADIENT = "cg"

    @classmethod
    def parse(cls, value: Union[str, "FlowMethod"]) -> "FlowMethod":
        if isinstance(value, FlowMethod):
            return value
        for method in cls:
            if method.value == str(value).lower():
                return method
        raise ConfigError(f"Unknown flow method {value!r} (expected descent or cg)")


@dataclass
class FlowConfig:
    dt: Optional[float] = None
    max_steps: int = 5000
    grad_tol: float = 1e-6
    backtracking: bool = True
    max_rejections: int = 20
    armijo: float = 1e-4
    method: Union[str, FlowMethod] = FlowMethod.CONJUGATE_GRADIENT
    growth: float = 1.5

    def __post_init__(self):
        self.method = FlowMethod.parse(self.method)
        if self.dt is not None and self.dt <= 0:
            raise ConfigError(f"flow.dt must be positive, got {self.dt}")
        if self.max_steps < 0 or self.grad_tol <= 0:
            raise ConfigError("flow.max_steps must be >= 0 and flow.grad_tol positive")
        if self.growth < 1:
            raise ConfigError(f"flow.growth must be >= 1, got {self.growth}")

    def step_for(self, h: float) -> float:
        return self.dt if self.dt is not None else 0.1 * h * h


@dataclass
class FlowResult:
    A: Connection
    energies: List[float]
    grad_norms: List[float]
    steps: int
    rejections: int
    converged: bool

    def to_payload(self) -> Dict[str, Any]:
        return {
            "steps": self.steps,
            "rejections": self.rejections,
            "converged": self.converged,
            "initial_energy": self.energies[0],
            "final_energy": self.energies[-1],
            "final_grad_norm": self.grad_norms[-1],
        }


# Bilinear maps

def bmap(u: LatticeForm, v: LatticeForm, A: Connection) -> LatticeForm:
    """B(u, v) = 1/2 Lambda_omega [d_A u ^ d_A v] for Lie-algebra-valued 0-forms."""
    if u.degree != 0 or v.degree != 0:
        raise UsageError("bmap takes two 0-forms")
    alpha, beta = dA(u, A).data, dA(v, A).data
    pairs = A.algebra.bracket(alpha[..., :, None, :], beta[..., None, :, :])
    wedge = np.einsum("kij,...ija->...ka", _wedge_tensor(1, 1), pairs)
    return LatticeForm(0, 0.5 * lambda_omega(LatticeForm(2, wedge)).data)


def bmap_bound_ratio(u: LatticeForm, v: LatticeForm, A: Connection) -> float:
    """max_x |B(u, v)| / (|nabla u| |nabla v|) over sites where the denominator is nonzero."""
    numer = np.sqrt(pointwise_norm_sq(bmap(u, v, A)))
    denom = np.sqrt(pointwise_norm_sq(nabla(u, A)) * pointwise_norm_sq(nabla(v, A)))
    mask = denom > 1e-300
    if not np.any(mask):
        return 0.0
    return float(np.max(numer[mask] / denom[mask]))


def smap(
    f: LatticeForm, g: LatticeForm, A: Connection, cfg: Optional[DeformConfig] = None,
    lam: Optional[EigenResult] = None,
) -> LatticeForm:
    """S(f, g) = B((d_A* d_A)^-1 f, (d_A* d_A)^-1 g)."""
    cfg = cfg or DeformConfig()
    lam = lam or lambda_A(A, cfg.spectral)
    u = solve_laplace(A, f, cfg.spectral, lam=lam)
    v = u if g is f else solve_laplace(A, g, cfg.spectral, lam=lam)
    return bmap(u, v, A)


def correction_potential(s: LatticeForm, A: Connection, correction: str = "adjoint") -> LatticeForm:
    """
    a(s) for a real 0-form s.

    "adjoint" is d_A*(s (x) omega); "dolbeault" is i(del_A s - delbar_A s). They
    agree in the continuum.
    """
    if correction == "adjoint":
        return dA_star(lomega(s), A)
    if correction == "dolbeault":
        diff = del_(s, A).data - delbar(s, A).data
        return LatticeForm(1, np.real(1j * diff).copy())
    raise UsageError(f"Unknown correction stencil {correction!r}")


def deformed(A: Connection, s: LatticeForm, correction: str = "adjoint") -> Connection:
    return A.shifted(correction_potential(s, A, correction))


def trace_curvature(A: Connection) -> LatticeForm:
    return lambda_omega(curvature(A))


# Deformation

def _check_basin(A: Connection, trace_norm: float, cfg: DeformConfig) -> EigenResult:
    lam = lambda_A(A, cfg.spectral)
    if lam.value < cfg.lambda_floor:
        raise NearReducible(
            f"lambda(A)={lam.value:.3e} is below the floor {cfg.lambda_floor:.1e}",
            {"lambda": lam.value, "lambda_floor": cfg.lambda_floor, "trace_norm": trace_norm},
        )
    if trace_norm > cfg.rho_max:
        raise NoContraction(
            f"||Lambda F||={trace_norm:.3e} exceeds rho_max={cfg.rho_max}",
            {"trace_norm": trace_norm, "rho_max": cfg.rho_max},
        )
    return lam


def _stalled(norms: List[float]) -> bool:
    if len(norms) <= STALL_LIMIT:
        return False
    tail = norms[-(STALL_LIMIT + 1):]
    return all(b >= a for a, b in zip(tail, tail[1:]))


def _picard_iteration(A: Connection, trace: LatticeForm, cfg: DeformConfig, lam: EigenResult):
    algebra = A.algebra
    f_prev = trace
    norms = [l2_norm(trace, algebra)]
    iterations = 1
    for k in range(2, cfg.max_outer + 1):
        f = smap(f_prev, f_prev, A, cfg, lam) + trace
        g_norm = l2_norm(f - f_prev, algebra)
        norms.append(g_norm)
        iterations = k
        logger.debug(f"Picard k={k}: ||g_k||={g_norm:.3e}")
        f_prev = f
        if g_norm < cfg.tol:
            break
        if _stalled(norms):
            raise NoContraction(
                f"Picard increments did not decrease for {STALL_LIMIT} consecutive steps",
                {"trace_norms": norms},
            )
    else:
        raise NoContraction(f"Picard iteration did not reach tol={cfg.tol} in {cfg.max_outer} steps", {"trace_norms": norms})
    s = -solve_laplace(A, f_prev, cfg.spectral, lam=lam)
    return s, norms, iterations


def _discrete_residual(A: Connection, trace: LatticeForm, cfg: DeformConfig, lam: EigenResult):
    algebra = A.algebra
    s = LatticeForm.zeros(A.n, 0, algebra.dim)
    norms: List[float] = []
    for k in range(1, cfg.max_outer + 1):
        residual = trace if k == 1 else trace_curvature(deformed(A, s, cfg.correction))
        r_norm = l2_norm(residual, algebra)
        norms.append(r_norm)
        logger.debug(f"Residual iteration k={k}: ||Lambda F||={r_norm:.3e}")
        if r_norm <= cfg.tol:
            return s, norms, k
        if _stalled(norms):
            raise NoContraction(
                f"Discrete residual did not decrease for {STALL_LIMIT} consecutive steps",
                {"trace_norms": norms},
            )
        s = s - solve_laplace(A, residual, cfg.spectral, lam=lam)
    raise NoContraction(f"Discrete residual did not reach tol={cfg.tol} in {cfg.max_outer} steps", {"trace_norms": norms})


def taubes_deform(A: Connection, cfg: Optional[DeformConfig] = None) -> DeformResult:
    """
    Deforms A to A_inf = A + a(s) with Lambda_omega F_{A_inf} = 0.

    PaperPicard runs f_k = S(f_{k-1}, f_{k-1}) + Lambda F_A from f_1 = Lambda F_A
    and sets s = -(d_A* d_A)^-1 f. DiscreteResidual iterates
    s <- s - (d_A* d_A)^-1 Lambda F_{A + a(s)} on the exact lattice residual.

    Args:
        A: Connection to deform; not modified.
        cfg: Mode, tolerances, basin limits and correction stencil.
            Defaults to DeformConfig().

    Returns:
        DeformResult with s, A_inf, the per-iteration trace norms, the final
        ||Lambda F_inf||, the Sobolev ratio of s and, for PaperPicard, the
        geometric decay fit.

    Raises:
        NearReducible: lambda(A) is below cfg.lambda_floor.
        NoContraction: ||Lambda F_A|| exceeds rho_max, or the iteration stalls
            or runs out of outer steps.
    """
    cfg = cfg or DeformConfig()
    algebra = A.algebra
    F = curvature(A)
    trace = lambda_omega(F)
    rho = l2_norm(trace, algebra)

    if rho <= cfg.tol:
        logger.info(f"||Lambda F||={rho:.3e} is already below tol; nothing to deform")
        zero = LatticeForm.zeros(A.n, 0, algebra.dim)
        return DeformResult(zero, A.copy(), [rho], rho, 0.0, cfg.mode, 1, float("nan"))

    lam = _check_basin(A, rho, cfg)
    if cfg.mode is DeformMode.PAPER_PICARD:
        s, norms, iterations = _picard_iteration(A, trace, cfg, lam)
    else:
        s, norms, iterations = _discrete_residual(A, trace, cfg, lam)

    A_inf = deformed(A, s, cfg.correction)
    F_inf = curvature(A_inf)
    final_residual = l2_norm(lambda_omega(F_inf), algebra)
    f02_before = pq_project(F, 0, 2)
    f02_shift = l2_norm(pq_project(F_inf, 0, 2) - f02_before, algebra)
    shift_scale = (rho + lp_norm(f02_before, cfg.f02_p, algebra)) * rho
    result = DeformResult(
        s=s,
        A_inf=A_inf,
        trace_norms=norms,
        final_residual=final_residual,
        s_norm_ratio=sobolev_norm(s, A, 2.0, 2) / rho,
        mode=cfg.mode,
        iterations=iterations,
        lam=lam.value,
        f02_shift=f02_shift,
        f02_shift_ratio=f02_shift / shift_scale if shift_scale > 0 else 0.0,
        decay_fit=fit_geometric_decay(norms, rho) if cfg.mode is DeformMode.PAPER_PICARD else {},
    )
    logger.info(
        f"{cfg.mode.value}: {iterations} iterations, ||Lambda F_inf||={final_residual:.3e}, "
        f"s ratio={result.s_norm_ratio:.3f}"
    )
    return result


def fit_geometric_decay(norms: List[float], rho: Optional[float] = None) -> Dict[str, Any]:
    """
    Log-linear fit log ||g_k|| = a + b (k - 1).

    rate = exp(b) is the observed contraction factor; with rho given, q = rate / rho
    is the constant in ||g_{k+1}|| <= q rho ||g_k||.
    """
    points = [(k, value) for k, value in enumerate(norms, start=1) if value > 0 and math.isfinite(value)]
    if len(points) < 3:
        return {"points": len(points), "slope": None, "rate": None, "c_hat": None, "q": None, "r_squared": None}
    ks = np.array([k - 1 for k, _ in points], dtype=float)
    logs = np.log([value for _, value in points])
    fit = linregress(ks, logs)
    rate = math.exp(fit.slope)
    return {
        "points": len(points),
        "slope": float(fit.slope),
        "rate": rate,
        "c_hat": math.exp(fit.intercept),
        "q": rate / rho if rho else None,
        "r_squared": float(fit.rvalue ** 2),
    }


# A-priori estimates

def laplace_estimates(A: Connection, f: LatticeForm, cfg: Optional[DeformConfig] = None) -> Dict[str, float]:
    """||s||_{L^2_2} / ||f|| and ||B(s, s)|| / ||f||^2 for d_A* d_A s = f."""
    cfg = cfg or DeformConfig()
    f_norm = l2_norm(f, A.algebra)
    if f_norm == 0:
        return {"s_sobolev_ratio": 0.0, "bilinear_ratio": 0.0}
    s = solve_laplace(A, f, cfg.spectral)
    return {
        "s_sobolev_ratio": sobolev_norm(s, A, 2.0, 2) / f_norm,
        "bilinear_ratio": l2_norm(bmap(s, s, A), A.algebra) / f_norm ** 2,
    }


def bilinear_estimate(A: Connection, f1: LatticeForm, f2: LatticeForm, cfg: Optional[DeformConfig] = None) -> float:
    """||B(s1, s2)|| / (||f1|| ||f2||)."""
    cfg = cfg or DeformConfig()
    denom = l2_norm(f1, A.algebra) * l2_norm(f2, A.algebra)
    if denom == 0:
        return 0.0
    lam = lambda_A(A, cfg.spectral)
    s1 = solve_laplace(A, f1, cfg.spectral, lam=lam)
    s2 = solve_laplace(A, f2, cfg.spectral, lam=lam)
    return l2_norm(bmap(s1, s2, A), A.algebra) / denom


# Yang-Mills gradient flow

def _quadratic_curvature(p: LatticeForm, algebra) -> np.ndarray:
    """[p_mu, p_nu] per 2-form slot, the alpha^2 part of F_{A + alpha p}."""
    pot = p.data
    return np.stack([algebra.bracket(pot[..., mu, :], pot[..., nu, :]) for mu, nu in MULTI_INDICES[2]], axis=-2)


def energy_along(A: Connection, F: LatticeForm, p: LatticeForm) -> np.ndarray:
    """
    Coefficients (c4, c3, c2, c1, c0) of the quartic YM(A + alpha p) in alpha.

    The lattice curvature is quadratic in the potential, so the energy along
    a line is an exact quartic.
    """
    algebra = A.algebra
    F2 = _quadratic_curvature(p, algebra)
    F1 = curvature(A.shifted(p)).data - F.data - F2
    F0 = F.data

    def inner(u: np.ndarray, v: np.ndarray) -> float:
        return float(np.real(l2_inner(u, v, algebra)))

    return np.array([
        inner(F2, F2),
        2.0 * inner(F1, F2),
        inner(F1, F1) + 2.0 * inner(F0, F2),
        2.0 * inner(F0, F1),
        inner(F0, F0),
    ])


def exact_line_step(coeffs: np.ndarray) -> Optional[float]:
    """Positive alpha minimising the quartic; None when the line is not a descent direction."""
    if coeffs[3] >= 0:
        return None
    critical = np.roots(np.polyder(coeffs))
    candidates = [float(r.real) for r in critical if abs(r.imag) <= 1e-10 * max(1.0, abs(r)) and r.real > 0]
    if not candidates:
        return None
    return min(candidates, key=lambda alpha: np.polyval(coeffs, alpha))


def _armijo_ok(trial_energy: float, energy: float, slope: float, step: float, cfg: FlowConfig) -> bool:
    return trial_energy <= energy + cfg.armijo * step * slope


def ym_gradient_flow(A0: Connection, cfg: Optional[FlowConfig] = None) -> FlowResult:
    """
    Drives A0 towards a Yang-Mills connection, d_A* F_A = 0.

    "descent" is the explicit flow A <- A - dt d_A* F_A with Armijo backtracking;
    dt grows by `growth` after each accepted step and halves on rejection.
    "cg" follows Polak-Ribiere conjugate directions with an exact line search
    on the quartic energy, falling back to steepest descent when a direction
    stops descending. Both accept a step only if the energy drops.

    Args:
        A0: Starting connection; not modified.
        cfg: Step size, tolerance and method. Defaults to FlowConfig().

    Returns:
        FlowResult with the final connection, the energy and |d_A* F| traces,
        the number of accepted steps and rejections, and whether grad_tol was met.

    Raises:
        StepRejectionLimit: A step failed the energy test with backtracking off,
            or after max_rejections halvings.
    """
    cfg = cfg or FlowConfig()
    dt = cfg.step_for(A0.torus.h)
    A = A0.copy()
    F = curvature(A)
    energy = ym_energy(A, F)
    grad = yang_mills_gradient(A, F)
    grad_norm = l2_norm(grad, A.algebra)
    energies, grad_norms = [energy], [grad_norm]
    rejections = 0
    steps = 0
    direction: Optional[LatticeForm] = None
    previous_grad: Optional[LatticeForm] = None

    while grad_norm > cfg.grad_tol and steps < cfg.max_steps:
        if cfg.method is FlowMethod.CONJUGATE_GRADIENT:
            direction = _conjugate_direction(grad, previous_grad, direction, A.algebra)
            coeffs = energy_along(A, F, direction)
            step = exact_line_step(coeffs)
            if step is None:
                direction = -grad
                coeffs = energy_along(A, F, direction)
                step = exact_line_step(coeffs)
            if step is None:
                logger.warning(f"No descent direction at step {steps + 1}; stopping at |d_A* F|={grad_norm:.3e}")
                break
            slope = float(coeffs[3])
        else:
            direction = -grad
            step = dt
            slope = -2.0 * grad_norm ** 2

        for attempt in range(cfg.max_rejections + 1):
            trial = A.shifted(direction * step)
            trial_F = curvature(trial)
            trial_energy = ym_energy(trial, trial_F)
            if _armijo_ok(trial_energy, energy, slope, step, cfg):
                break
            if not cfg.backtracking or attempt == cfg.max_rejections:
                raise StepRejectionLimit(
                    f"Energy did not decrease at step {steps + 1} (step={step:.3e})",
                    {"step": steps + 1, "energy": energy, "trial_energy": trial_energy, "dt": step},
                )
            rejections += 1
            step *= 0.5

        if cfg.method is FlowMethod.DESCENT:
            dt = step * cfg.growth if attempt == 0 else step
        previous_grad = grad
        A, F, energy = trial, trial_F, trial_energy
        grad = yang_mills_gradient(A, F)
        grad_norm = l2_norm(grad, A.algebra)
        steps += 1
        energies.append(energy)
        grad_norms.append(grad_norm)
        if steps % 100 == 0:
            logger.debug(f"flow step {steps}: energy={energy:.6e} |d_A* F|={grad_norm:.3e}")
    converged = grad_norm <= cfg.grad_tol
    logger.info(
        f"Flow ({cfg.method.value}) stopped after {steps} steps: energy={energy:.6e}, "
        f"|d_A* F|={grad_norm:.3e}, converged={converged}"
    )
    return FlowResult(A, energies, grad_norms, steps, rejections, converged)


def _conjugate_direction(
    grad: LatticeForm, previous_grad: Optional[LatticeForm], direction: Optional[LatticeForm], algebra,
) -> LatticeForm:
    """Polak-Ribiere+ update; restarts on the steepest direction when beta <= 0."""
    steepest = -grad
    if previous_grad is None or direction is None:
        return steepest
    denom = float(np.real(l2_inner(previous_grad, previous_grad, algebra)))
    if denom == 0:
        return steepest
    beta = float(np.real(l2_inner(grad, grad - previous_grad, algebra))) / denom
    if beta <= 0:
        return steepest
    return steepest + direction * beta
