import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from deform import correction_potential
from errors import DegenerateField, UsageError
from gauge_fields import (
    Connection, bracket_with_trace, centered_curvature, curvature, curvature_split, dA, dA_star, del_, del_star,
    delbar, delbar_star, dolbeault_laplacian, energy_split, laplacian_nabla, laplacian_nabla_bar, nabla, nabla_bar,
    nabla_star, trigonometric_connection, trigonometric_curvature, yang_mills_gradient,
)
from lattice_geometry import (
    DIMENSION, INDEX_OF, LatticeForm, PQForm, Torus4, conj_adjoint, d, d_star, hodge_star, l2_inner, l2_norm,
    lambda_omega, lomega, lp_norm, n_components, pq_components, pq_decompose, sd_asd_project, to_real,
)
from lie_algebra import GroupKind, LieAlgebra
from spectral import coefficient_form
from utils import array_digest

# Configure Logging
logger = logging.getLogger(__name__)

# Reported when both residuals of a refinement pair sit at round-off.
ORDER_CAP = 10.0
ROUNDOFF = 1e-13
EXACT_TOL = 1e-10
ZERO_SET = 1e-10

SD_BASIS = {
    1: {(0, 1): 1.0, (2, 3): 1.0},
    2: {(0, 2): 1.0, (1, 3): -1.0},
    3: {(0, 3): 1.0, (1, 2): 1.0},
}


@dataclass
class IdentityReport:
    name: str
    residual: float
    norm_scale: float
    n: int
    order_estimate: Optional[float] = None
    inputs_digest: str = ""
    exact: bool = False
    extras: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.residual = abs(float(self.residual))

    def to_payload(self) -> Dict[str, Any]:
        payload = {
            "name": self.name,
            "n": self.n,
            "residual": self.residual,
            "norm_scale": self.norm_scale,
            "order_estimate": self.order_estimate,
            "inputs_digest": self.inputs_digest,
        }
        if self.extras:
            payload["extras"] = dict(self.extras)
        return payload


def _relative(diff: float, scale: float) -> float:
    return diff / scale if scale > 0 else diff


# Weitzenbock and Yang-Mills identities

def weitzenbock_02(A: Connection, phi: PQForm, variant: str = "antiholomorphic") -> IdentityReport:
    """
    Residual of the (0, 2) Weitzenbock identity relative to ||phi||.

    antiholomorphic: Delta_dbar phi = nabla''* nabla'' phi + [i Lambda F, phi]
    full:            2 Delta_dbar phi = nabla* nabla phi + [i Lambda F, phi]

    The trace uses the centered curvature, which keeps the antiholomorphic
    residual second order; the full variant stays first order.
    """
    if not isinstance(phi, PQForm) or phi.bidegree != (0, 2):
        raise UsageError("weitzenbock_02 needs a (0, 2)-form")
    trace = lambda_omega(centered_curvature(A))
    box = dolbeault_laplacian(phi, A).data
    twist = bracket_with_trace(trace, phi, A.algebra).data
    if variant == "antiholomorphic":
        diff = box - laplacian_nabla_bar(phi, A).data - twist
    elif variant == "full":
        diff = 2.0 * box - laplacian_nabla(phi, A).data - twist
    else:
        raise UsageError(f"Unknown Weitzenbock variant {variant!r}")
    scale = l2_norm(phi, A.algebra)
    return IdentityReport(
        f"weitzenbock_02_{variant}", _relative(l2_norm(diff, A.algebra), scale), scale, A.n,
        inputs_digest=array_digest(A.potential, phi.data),
    )


def ym_pointwise_identity(A: Connection) -> IdentityReport:
    """||nabla''* nabla'' F02 + 3/2 [i Lambda F, F02]|| / ||F02||; vanishes for Yang-Mills A."""
    _, _, trace, f02 = pq_decompose(curvature(A))
    diff = laplacian_nabla_bar(f02, A).data + 1.5 * bracket_with_trace(trace, f02, A.algebra).data
    scale = l2_norm(f02, A.algebra)
    return IdentityReport(
        "ym_pointwise", _relative(l2_norm(diff, A.algebra), scale), scale, A.n,
        inputs_digest=array_digest(A.potential),
    )


def ym_integral_identity(A: Connection) -> IdentityReport:
    """
    |3/4 ||delbar_A Lambda F||^2 - ||nabla''_A F02||^2| over the larger side.

    The Yang-Mills residual ||d_A* F|| is attached so callers can scale by it.
    """
    F = curvature(A)
    _, _, trace, f02 = pq_decompose(F)
    left = 0.75 * l2_norm(delbar(trace, A), A.algebra) ** 2
    right = l2_norm(nabla_bar(f02, A), A.algebra) ** 2
    scale = max(left, right)
    return IdentityReport(
        "ym_integral", _relative(abs(left - right), scale), scale, A.n,
        inputs_digest=array_digest(A.potential),
        extras={"left": left, "right": right, "yang_mills": l2_norm(dA_star(F, A), A.algebra)},
    )


def trace_weitzenbock(A: Connection) -> IdentityReport:
    """||nabla_A Lambda F||^2 = 2 ||delbar_A Lambda F||^2 for the real trace."""
    trace = lambda_omega(curvature(A))
    left = l2_norm(nabla(trace, A), A.algebra) ** 2
    right = 2.0 * l2_norm(delbar(trace, A), A.algebra) ** 2
    scale = max(left, right)
    return IdentityReport(
        "trace_weitzenbock", _relative(abs(left - right), scale), scale, A.n,
        inputs_digest=array_digest(A.potential), exact=True,
    )


# Rank-one and [B.B] structure

def _f02_coefficient(F02: PQForm) -> np.ndarray:
    return F02.coefficients()[..., 0, :]


def rank_one_check(F02: PQForm, algebra: Optional[LieAlgebra] = None) -> Dict[str, float]:
    """
    Writes F02 = (B1 + i B2) dzbar1 ^ dzbar2 and measures [B1, B2].

    Returns commutator_norm (L^2), commutator_max and rank_profile, the
    fraction of sites where (B1, B2) span at most one direction.
    """
    algebra = algebra or LieAlgebra(GroupKind.SU2 if F02.dim == 3 else GroupKind.U1)
    coeff = _f02_coefficient(F02)
    b1, b2 = np.real(coeff), np.imag(coeff)
    commutator = algebra.bracket(b1, b2)
    stacked = np.stack([b1, b2], axis=-2)
    singular = np.linalg.svd(stacked, compute_uv=False)
    if F02.dim > 1:
        rank_one = singular[..., -1] <= 1e-8 * np.maximum(singular[..., 0], 1.0)
    else:
        rank_one = np.ones(b1.shape[:-1], dtype=bool)
    pointwise = np.sqrt(algebra.norm_sq(commutator))
    h = 1.0 / F02.n
    return {
        "commutator_norm": float(np.sqrt(h ** DIMENSION * np.sum(pointwise ** 2))),
        "commutator_max": float(np.max(pointwise)),
        "rank_profile": float(np.mean(rank_one)),
    }


def _sd_coefficients(B: LatticeForm) -> List[np.ndarray]:
    """B = B1 omega1 + B2 omega2 + B3 omega3 in the self-dual basis (|omega_i|^2 = 2)."""
    out = []
    for i in (1, 2, 3):
        total = 0.0
        for multi, sign in SD_BASIS[i].items():
            total = total + sign * B.data[..., INDEX_OF[2][multi], :]
        out.append(0.5 * total)
    return out


def _from_sd(coeffs: List[np.ndarray], n: int, dim: int, dtype) -> LatticeForm:
    out = LatticeForm.zeros(n, 2, dim, dtype=dtype)
    for i, c in zip((1, 2, 3), coeffs):
        for multi, sign in SD_BASIS[i].items():
            out.data[..., INDEX_OF[2][multi], :] += sign * c
    return out


def _require_self_dual(B: LatticeForm) -> None:
    if B.degree != 2:
        raise UsageError("[B.B] is defined on 2-forms")
    defect = np.max(np.abs(B.data - hodge_star(B).data)) if B.data.size else 0.0
    if defect > EXACT_TOL * max(1.0, float(np.max(np.abs(B.data)))):
        raise UsageError(f"[B.B] needs a self-dual input (|B - *B| = {defect:.3e})")


def dot_bracket(B: LatticeForm, C: LatticeForm, algebra: LieAlgebra) -> LatticeForm:
    """
    Polarized [B.C] on self-dual forms.

    Defined by -1/4 [B.B] = [B2, B3] omega1 + [B3, B1] omega2 + [B1, B2] omega3.
    """
    _require_self_dual(B)
    _require_self_dual(C)
    b = _sd_coefficients(B)
    c = _sd_coefficients(C)
    br = algebra.bracket
    coeffs = [
        -2.0 * (br(b[1], c[2]) + br(c[1], b[2])),
        -2.0 * (br(b[2], c[0]) + br(c[2], b[0])),
        -2.0 * (br(b[0], c[1]) + br(c[0], b[1])),
    ]
    return _from_sd(coeffs, B.n, B.dim, np.result_type(B.data, C.data))


def dot_bracket_map(B: LatticeForm, algebra: LieAlgebra) -> LatticeForm:
    return dot_bracket(B, B, algebra)


# f (x) sigma split

@dataclass
class FSigmaSplit:
    f: np.ndarray
    sigma: np.ndarray
    residual: float
    nabla_sigma: float
    f_nabla_sigma: float
    f_dbar_star: float
    f_d: float
    f_d_star: float
    nonzero_fraction: float


def f_sigma_split(phi: PQForm, A: Connection) -> FSigmaSplit:
    """
    Polar split phi = f (x) sigma with |sigma| = 1 on the nonzero set.

    sigma is the dominant real direction of (Re c, Im c) for the coefficient
    c of phi, sign-aligned with the previous nonzero site in C order; zero
    sites inherit the previous nonzero sigma (the first nonzero one for a
    leading run).
    """
    if not isinstance(phi, PQForm) or phi.bidegree != (0, 2):
        raise UsageError("f_sigma_split needs a (0, 2)-form")
    coeff = _f02_coefficient(phi)
    site_shape = coeff.shape[:-1]
    flat = coeff.reshape(-1, coeff.shape[-1])
    magnitude = np.linalg.norm(flat, axis=-1)
    nonzero = magnitude > ZERO_SET
    fraction = float(np.mean(nonzero))
    if fraction < 0.1:
        raise DegenerateField(
            f"Only {fraction:.1%} of sites carry a nonzero (0, 2) coefficient",
            {"nonzero_fraction": fraction},
        )

    stacked = np.stack([np.real(flat), np.imag(flat)], axis=-2)
    _, _, vt = np.linalg.svd(stacked, full_matrices=False)
    directions = vt[:, 0, :]
    sigma = np.zeros_like(directions)
    previous = directions[np.argmax(nonzero)]
    for index in range(len(flat)):
        if nonzero[index]:
            current = directions[index]
            if float(np.dot(current, previous)) < 0:
                current = -current
            previous = current
        sigma[index] = previous
    f = np.sum(flat * sigma, axis=-1)

    residual = float(np.linalg.norm(flat - f[:, None] * sigma) / np.linalg.norm(flat))
    f = f.reshape(site_shape)
    sigma = sigma.reshape(site_shape + (coeff.shape[-1],))

    grad_sigma = nabla(sigma[..., None, :], A)
    mask = (np.abs(f) > ZERO_SET).astype(float)
    h4 = (1.0 / phi.n) ** DIMENSION
    grad_sq = np.sum(grad_sigma ** 2, axis=tuple(range(DIMENSION, grad_sigma.ndim)))
    nabla_sigma = float(np.sqrt(h4 * np.sum(mask * grad_sq)))
    f_nabla_sigma = float(np.sqrt(h4 * np.sum(np.abs(f) ** 2 * grad_sq)))

    flat_connection = Connection.zeros(phi.n, LieAlgebra(GroupKind.U1))
    scalar = coefficient_form(f[..., None])
    f_norm = float(np.sqrt(h4 * np.sum(np.abs(f) ** 2)))

    def relative(value: float) -> float:
        return value / f_norm if f_norm > 0 else 0.0

    return FSigmaSplit(
        f, sigma, residual, nabla_sigma, f_nabla_sigma,
        f_dbar_star=relative(l2_norm(delbar_star(scalar, flat_connection))),
        f_d=relative(l2_norm(d(scalar))),
        f_d_star=relative(l2_norm(d_star(scalar))),
        nonzero_fraction=fraction,
    )


def harmonicity_report(A: Connection) -> Dict[str, float]:
    """
    Yang-Mills and Kahler-identity residuals of the curvature.

    Args:
        A: Connection to inspect, usually a gradient-flow output.

    Returns:
        Dictionary of L2 norms: yang_mills, dbar_star_f02, kahler_02,
        kahler_20, trace, fplus, f02, plus the relative residuals f_d,
        f_d_star and f_dbar_star of the scalar f in F02 = f (x) sigma.
        The f residuals are 0 when F02 vanishes on most sites.
    """
    algebra = A.algebra
    split = curvature_split(A)
    trace = split.trace
    dbar_star_f02 = delbar_star(split.F02, A)
    del_star_f20 = del_star(split.F20, A)
    report = {
        "yang_mills": l2_norm(yang_mills_gradient(A, split.F), algebra),
        "dbar_star_f02": l2_norm(dbar_star_f02, algebra),
        "kahler_02": l2_norm(2.0 * dbar_star_f02.data - 1j * delbar(trace, A).data, algebra),
        "kahler_20": l2_norm(2.0 * del_star_f20.data + 1j * del_(trace, A).data, algebra),
        "trace": l2_norm(trace, algebra),
        "fplus": l2_norm(split.Fplus, algebra),
        "f02": l2_norm(split.F02, algebra),
        "f_d": 0.0,
        "f_d_star": 0.0,
        "f_dbar_star": 0.0,
    }
    try:
        polar = f_sigma_split(split.F02, A)
    except DegenerateField as e:
        logger.debug(f"harmonicity_report: no f (x) sigma split ({e.message})")
        return report
    report.update({"f_d": polar.f_d, "f_d_star": polar.f_d_star, "f_dbar_star": polar.f_dbar_star})
    return report


def lp_ratio_report(A: Connection, p: float) -> Dict[str, float]:
    """||F02||_p, ||F02||_q and their ratio for q = (1/2 + 1/p)^-1."""
    if p <= 4:
        raise UsageError(f"lp_ratio_report needs p > 4, got {p}")
    q = 1.0 / (0.5 + 1.0 / p)
    _, _, _, f02 = pq_decompose(curvature(A))
    norm_p = lp_norm(f02, p, A.algebra)
    norm_q = lp_norm(f02, q, A.algebra)
    return {"p": p, "q": q, "norm_p": norm_p, "norm_q": norm_q, "ratio": norm_p / norm_q if norm_q > 0 else 0.0}


# Refinement

def estimate_order(coarse: float, fine: float) -> float:
    """log2(coarse / fine); capped when both residuals are at round-off."""
    if fine <= ROUNDOFF:
        return ORDER_CAP
    if coarse <= ROUNDOFF:
        return -ORDER_CAP
    return min(ORDER_CAP, math.log2(coarse / fine))


def refinement_pair(check: Callable[[int], IdentityReport], n: int) -> IdentityReport:
    """Runs check at n and 2n and returns the fine report with its order estimate."""
    coarse = check(n)
    fine = check(2 * n)
    fine.order_estimate = estimate_order(coarse.residual, fine.residual)
    fine.extras.setdefault("coarse_residual", coarse.residual)
    logger.debug(f"{fine.name}: n={n} -> {2 * n}, order {fine.order_estimate:.2f}")
    return fine


# Exact identities

def self_dual_part_check(F: LatticeForm, algebra: LieAlgebra) -> IdentityReport:
    """F+ from the Hodge star against F20 + F02 + 1/2 Lambda F omega."""
    fplus, _ = sd_asd_project(F)
    f20, _, trace, f02 = pq_decompose(F)
    other = to_real([f20, f02, 0.5 * lomega(trace)])
    scale = l2_norm(fplus, algebra)
    diff = l2_norm(fplus.data - other.data, algebra)
    return IdentityReport(
        "self_dual_two_ways", _relative(diff, scale), scale, F.n,
        inputs_digest=array_digest(F.data), exact=True,
    )


def _adjoint_report(name: str, forward, backward, u: LatticeForm, v: LatticeForm, algebra: LieAlgebra,
                    corrupt: Optional[np.ndarray] = None) -> IdentityReport:
    fu = forward(u)
    bv = backward(v)
    if corrupt is not None:
        bv = bv._like(bv.data + corrupt.reshape(bv.data.shape))
    left = l2_inner(fu, v, algebra)
    right = l2_inner(u, bv, algebra)
    scale = l2_norm(fu, algebra) * l2_norm(v, algebra) + l2_norm(u, algebra) * l2_norm(bv, algebra)
    return IdentityReport(
        name, _relative(abs(left - right), scale), scale, u.n,
        inputs_digest=array_digest(u.data, v.data), exact=True,
    )


def _random_form(rng: np.random.Generator, n: int, degree: int, dim: int, complex_valued: bool = False) -> LatticeForm:
    shape = (n,) * DIMENSION + (n_components(degree), dim)
    data = rng.standard_normal(shape)
    if complex_valued:
        data = data + 1j * rng.standard_normal(shape)
    return LatticeForm(degree, data)


def exact_identity_suite(A: Connection, seed: int = 0, corrupt: float = 0.0) -> List[IdentityReport]:
    """
    Identities that hold to machine precision on the lattice.

    corrupt > 0 adds a random perturbation of that size to the d_A* output
    of the first adjointness check.
    """
    rng = np.random.default_rng(seed)
    algebra, n, dim = A.algebra, A.n, A.algebra.dim
    reports: List[IdentityReport] = []

    for k in range(DIMENSION):
        u = _random_form(rng, n, k, dim)
        v = _random_form(rng, n, k + 1, dim)
        noise = corrupt * rng.standard_normal(u.data.shape) if (k == 0 and corrupt > 0) else None
        reports.append(_adjoint_report(f"adjoint_dA_{k}", lambda x: dA(x, A), lambda y: dA_star(y, A), u, v, algebra, noise))

    for k in range(DIMENSION):
        u = _random_form(rng, n, k, dim, complex_valued=True)
        v = _random_form(rng, n, k + 1, dim, complex_valued=True)
        reports.append(_adjoint_report(f"adjoint_delbar_{k}", lambda x: delbar(x, A), lambda y: delbar_star(y, A), u, v, algebra))

    u = _random_form(rng, n, 1, dim)
    g = rng.standard_normal((n,) * DIMENSION + (DIMENSION, n_components(1), dim))
    left = l2_inner(nabla(u, A), g, algebra)
    right = l2_inner(u.data, nabla_star(g, A), algebra)
    scale = l2_norm(nabla(u, A), algebra) * l2_norm(g, algebra)
    reports.append(IdentityReport("adjoint_nabla", _relative(abs(left - right), scale), scale, n,
                                  inputs_digest=array_digest(u.data, g), exact=True))

    s = _random_form(rng, n, 0, dim)
    flat_split = _relative(l2_norm(dA(s, A).data - del_(s, A).data - delbar(s, A).data, algebra),
                           l2_norm(dA(s, A), algebra))
    reports.append(IdentityReport("dA_equals_del_plus_delbar", flat_split, l2_norm(s, algebra), n, exact=True))

    F = _random_form(rng, n, 2, dim)
    fplus, fminus = sd_asd_project(F)
    scale = l2_norm(F, algebra)
    reports.append(IdentityReport("sd_asd_reassembly", _relative(l2_norm(fplus.data + fminus.data - F.data, algebra), scale),
                                  scale, n, exact=True))
    reports.append(IdentityReport("sd_eigen", _relative(
        l2_norm(hodge_star(fplus).data - fplus.data, algebra) + l2_norm(hodge_star(fminus).data + fminus.data, algebra),
        scale), scale, n, exact=True))
    reassembled = to_real(pq_components(F))
    reports.append(IdentityReport("pq_reassembly", _relative(l2_norm(reassembled.data - F.data, algebra), scale),
                                  scale, n, exact=True))
    f20, f11_0, trace, f02 = pq_decompose(F)
    four_parts = to_real([f20, f11_0, 0.5 * lomega(trace), f02])
    reports.append(IdentityReport("curvature_split_reassembly",
                                  _relative(l2_norm(four_parts.data - F.data, algebra), scale), scale, n, exact=True))
    reports.append(IdentityReport("f20_conjugate_f02",
                                  _relative(l2_norm(f20.data + conj_adjoint(f02).data, algebra), scale), scale, n,
                                  exact=True))
    reports.append(self_dual_part_check(F, algebra))

    alpha = _random_form(rng, n, 2, dim)
    beta = _random_form(rng, n, 0, dim)
    left = l2_inner(lambda_omega(alpha), beta, algebra)
    right = l2_inner(alpha, lomega(beta), algebra)
    reports.append(IdentityReport("lambda_lomega_adjoint", _relative(abs(left - right), abs(left) + abs(right)),
                                  abs(left), n, exact=True))
    star_form = hodge_star(lomega(hodge_star(alpha)))
    reports.append(IdentityReport("lambda_via_star", _relative(
        l2_norm(star_form.data - lambda_omega(alpha).data, algebra), l2_norm(lambda_omega(alpha), algebra)),
        l2_norm(alpha, algebra), n, exact=True))

    for k in (0, 1):
        w = _random_form(rng, n, k, dim)
        scale = l2_norm(d(w), algebra)
        reports.append(IdentityReport(f"dd_zero_{k}", _relative(l2_norm(d(d(w)), algebra), scale), scale, n, exact=True))

    split = energy_split(A)
    ym = split["ym"]
    decomposed = 4.0 * split["f02_sq"] + split["trace_sq"] + split["topological"]
    reports.append(IdentityReport("energy_decomposition", _relative(abs(ym - decomposed), ym), ym, n,
                                  inputs_digest=array_digest(A.potential), exact=True, extras=split))
    fplus_A, fminus_A = sd_asd_project(curvature(A))
    top_check = l2_norm(fminus_A, algebra) ** 2 - l2_norm(fplus_A, algebra) ** 2
    reports.append(IdentityReport("topological_term", _relative(abs(top_check - split["topological"]), ym), ym, n,
                                  exact=True))
    reports.append(trace_weitzenbock(A))
    return reports


# Discretization-limited identities

def _smooth_phi(n: int, algebra: LieAlgebra) -> PQForm:
    coords = Torus4(n).coordinates()
    wave = np.exp(2j * math.pi * (coords[0] + coords[2])) + 0.5 * np.cos(2.0 * math.pi * coords[1])
    frame = np.linspace(1.0, 2.0, algebra.dim)
    return coefficient_form(wave[..., None] * frame / np.linalg.norm(frame))


def convergence_suite(n: int, algebra: LieAlgebra) -> List[IdentityReport]:
    """
    Refinement pairs (n/2, n) on prescribed smooth fields.

    Each report carries order_estimate = log2 of the residual ratio.
    """
    coarse_n = max(2, n // 2)

    def curvature_error(m: int) -> IdentityReport:
        A = trigonometric_connection(m, algebra)
        exact = trigonometric_curvature(m, algebra)
        F = curvature(A)
        scale = l2_norm(exact, algebra)
        return IdentityReport("curvature_consistency", _relative(l2_norm(F.data - exact.data, algebra), scale), scale, m)

    def bianchi(m: int) -> IdentityReport:
        A = trigonometric_connection(m, algebra)
        F = curvature(A)
        scale = l2_norm(F, algebra)
        return IdentityReport("bianchi", _relative(l2_norm(dA(F, A), algebra), scale), scale, m)

    def weitzenbock(m: int) -> IdentityReport:
        return weitzenbock_02(trigonometric_connection(m, algebra), _smooth_phi(m, algebra))

    def correction_stencils(m: int) -> IdentityReport:
        A = trigonometric_connection(m, algebra)
        coords = Torus4(m).coordinates()
        s = LatticeForm.scalar(np.sin(2.0 * math.pi * (coords[0] + coords[3]))[..., None] * np.ones(algebra.dim))
        adjoint = correction_potential(s, A, "adjoint")
        dolbeault = correction_potential(s, A, "dolbeault")
        scale = l2_norm(adjoint, algebra)
        return IdentityReport("correction_stencils",
                              _relative(l2_norm(adjoint.data - dolbeault.data, algebra), scale), scale, m)

    checks = [curvature_error, bianchi, weitzenbock, correction_stencils]
    return [refinement_pair(check, coarse_n) for check in checks]


def check_failures(reports: List[IdentityReport], exact_tol: float = EXACT_TOL, order_min: float = 0.8) -> List[str]:
    """Names of reports that break the check contract."""
    failed = []
    for report in reports:
        if report.exact and report.residual > exact_tol:
            failed.append(report.name)
        elif report.order_estimate is not None and report.order_estimate < order_min:
            failed.append(report.name)
    return failed
