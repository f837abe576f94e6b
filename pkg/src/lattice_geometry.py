import logging
import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from errors import UsageError
from lie_algebra import LieAlgebra

# Configure Logging
logger = logging.getLogger(__name__)

DIMENSION = 4
MULTI_INDICES: Dict[int, List[Tuple[int, ...]]] = {
    k: list(combinations(range(DIMENSION), k)) for k in range(DIMENSION + 1)
}
INDEX_OF: Dict[int, Dict[Tuple[int, ...], int]] = {
    k: {multi: j for j, multi in enumerate(indices)} for k, indices in MULTI_INDICES.items()
}

# Holomorphic coframe dz1 = e0 + i e1, dz2 = e2 + i e3 in coefficients on e0..e3.
DZ = (np.array([1.0, 1.0j, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 1.0j]))
DZBAR = tuple(np.conj(v) for v in DZ)


def n_components(degree: int) -> int:
    _check_degree(degree)
    return len(MULTI_INDICES[degree])


def _check_degree(degree: int) -> None:
    if degree not in MULTI_INDICES:
        raise UsageError(f"Form degree must be in 0..4, got {degree}")


def _permutation_sign(seq: Sequence[int]) -> int:
    arr = list(seq)
    sign = 1
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return sign


def _wedge_basis(first: Tuple[int, ...], second: Tuple[int, ...]) -> Tuple[int, Optional[Tuple[int, ...]]]:
    if set(first) & set(second):
        return 0, None
    merged = first + second
    return _permutation_sign(merged), tuple(sorted(merged))


def _wedge_tensor(a: int, b: int) -> np.ndarray:
    """W[K, I, J] with e^I ^ e^J = sum_K W[K, I, J] e^K."""
    tensor = np.zeros((n_components(a + b), n_components(a), n_components(b)))
    for i, first in enumerate(MULTI_INDICES[a]):
        for j, second in enumerate(MULTI_INDICES[b]):
            sign, merged = _wedge_basis(first, second)
            if sign:
                tensor[INDEX_OF[a + b][merged], i, j] = sign
    return tensor


def wedge_coeffs(alpha: np.ndarray, a: int, beta: np.ndarray, b: int) -> np.ndarray:
    """Wedge of two constant (possibly complex) forms given by their coefficient vectors."""
    if a + b > DIMENSION:
        return np.zeros(0, dtype=np.result_type(alpha, beta))
    return np.einsum("kij,i,j->k", _wedge_tensor(a, b), alpha, beta)


def _star_matrix(degree: int) -> np.ndarray:
    out = np.zeros((n_components(DIMENSION - degree), n_components(degree)))
    for i, multi in enumerate(MULTI_INDICES[degree]):
        complement = tuple(m for m in range(DIMENSION) if m not in multi)
        out[INDEX_OF[DIMENSION - degree][complement], i] = _permutation_sign(multi + complement)
    return out


OMEGA = np.zeros(n_components(2))
OMEGA[INDEX_OF[2][(0, 1)]] = 1.0
OMEGA[INDEX_OF[2][(2, 3)]] = 1.0

STAR = {k: _star_matrix(k) for k in range(DIMENSION + 1)}
# L_omega: k -> k+2 as a matrix; Lambda_omega is its transpose.
LOMEGA = {k: np.einsum("kij,i->kj", _wedge_tensor(2, k), OMEGA) for k in range(DIMENSION - 1)}

# (mu, source slot I, target slot J, sign) with e^mu ^ e^I = sign e^J.
D_TABLE: Dict[int, List[Tuple[int, int, int, int]]] = {}
for _k in range(DIMENSION):
    D_TABLE[_k] = []
    for _mu in range(DIMENSION):
        for _i, _multi in enumerate(MULTI_INDICES[_k]):
            _sign, _merged = _wedge_basis((_mu,), _multi)
            if _sign:
                D_TABLE[_k].append((_mu, _i, INDEX_OF[_k + 1][_merged], _sign))


def _pq_types(degree: int) -> List[Tuple[int, int]]:
    return [(p, degree - p) for p in range(3) if 0 <= degree - p <= 2]


def _pq_basis(p: int, q: int) -> np.ndarray:
    """Columns dz^P ^ dzbar^Q (P, Q subsets of {1, 2}) in the real coframe basis."""
    columns = []
    for hol in combinations(range(2), p):
        for anti in combinations(range(2), q):
            vec, deg = np.ones(1, dtype=complex), 0
            for factor in [DZ[i] for i in hol] + [DZBAR[j] for j in anti]:
                vec = wedge_coeffs(vec, deg, factor, 1)
                deg += 1
            columns.append(vec)
    return np.stack(columns, axis=1)


PQ_BASIS: Dict[Tuple[int, int], np.ndarray] = {}
PQ_PROJECTORS: Dict[Tuple[int, int], np.ndarray] = {}
for _k in range(DIMENSION + 1):
    for _p, _q in _pq_types(_k):
        _basis = _pq_basis(_p, _q)
        _ortho, _ = np.linalg.qr(_basis)
        PQ_BASIS[(_p, _q)] = _basis
        PQ_PROJECTORS[(_p, _q)] = _ortho @ _ortho.conj().T


def _apply_matrix(matrix: np.ndarray, data: np.ndarray) -> np.ndarray:
    return np.einsum("ji,...ik->...jk", matrix, data)


@dataclass(frozen=True)
class Torus4:
    """Periodic grid of n sites per axis on the unit 4-torus, flat metric."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise UsageError(f"Torus needs at least 2 sites per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def volume_element(self) -> float:
        return self.h ** DIMENSION

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return (self.n,) * DIMENSION

    def coordinates(self) -> np.ndarray:
        """Array of shape (4, n, n, n, n) with x_mu = j * h."""
        axis = np.arange(self.n) * self.h
        return np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"))


@dataclass(eq=False)
class LatticeForm:
    """
    Lie-algebra-valued k-form sampled on the grid.

    data has shape (n, n, n, n, C(4, k), dim G); components are coefficients
    on e^I for increasing multi-indices I. Complex data represents forms with
    values in the complexified algebra.
    """

    degree: int
    data: np.ndarray

    def __post_init__(self):
        _check_degree(self.degree)
        data = np.asarray(self.data)
        if data.ndim != 6 or len(set(data.shape[:4])) != 1 or data.shape[4] != n_components(self.degree):
            raise UsageError(
                f"{self.degree}-form data must have shape (n, n, n, n, {n_components(self.degree)}, dim), got {data.shape}"
            )
        self.data = data

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def torus(self) -> Torus4:
        return Torus4(self.n)

    @property
    def dim(self) -> int:
        return self.data.shape[-1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    @classmethod
    def zeros(cls, n: int, degree: int, dim: int, dtype=float) -> "LatticeForm":
        return cls(degree, np.zeros((n,) * DIMENSION + (n_components(degree), dim), dtype=dtype))

    @classmethod
    def scalar(cls, values: np.ndarray) -> "LatticeForm":
        """0-form from site values of shape (n, n, n, n, dim)."""
        values = np.asarray(values)
        return cls(0, values[..., None, :])

    def values(self) -> np.ndarray:
        """Site values of a 0-form, shape (n, n, n, n, dim)."""
        if self.degree != 0:
            raise UsageError("values() is only defined for 0-forms")
        return self.data[..., 0, :]

    def component(self, multi: Tuple[int, ...]) -> np.ndarray:
        return self.data[..., INDEX_OF[self.degree][tuple(multi)], :]

    def _like(self, data: np.ndarray) -> "LatticeForm":
        return replace(self, data=data)

    def _compatible(self, other: "LatticeForm") -> None:
        if not isinstance(other, LatticeForm) or other.degree != self.degree:
            raise UsageError("Form arithmetic needs two forms of the same degree")

    def __add__(self, other: "LatticeForm") -> "LatticeForm":
        self._compatible(other)
        if type(other) is type(self) and getattr(other, "bidegree", None) == getattr(self, "bidegree", None):
            return self._like(self.data + other.data)
        return LatticeForm(self.degree, self.data + other.data)

    def __sub__(self, other: "LatticeForm") -> "LatticeForm":
        return self + (-other)

    def __neg__(self) -> "LatticeForm":
        return self._like(-self.data)

    def __mul__(self, scalar: Union[int, float, complex]) -> "LatticeForm":
        return self._like(self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: Union[int, float, complex]) -> "LatticeForm":
        return self._like(self.data / scalar)

    def copy(self) -> "LatticeForm":
        return self._like(self.data.copy())

    def conj(self) -> "LatticeForm":
        return self._like(np.conj(self.data))


@dataclass(eq=False)
class PQForm(LatticeForm):
    """Complex form of pure type (p, q), still stored in the real coframe basis."""

    p: int = 0
    q: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.p + self.q != self.degree or (self.p, self.q) not in PQ_BASIS:
            raise UsageError(f"Invalid bidegree ({self.p}, {self.q}) for a {self.degree}-form")
        self.data = self.data.astype(complex, copy=False)

    @property
    def bidegree(self) -> Tuple[int, int]:
        return (self.p, self.q)

    @classmethod
    def of(cls, p: int, q: int, data: np.ndarray) -> "PQForm":
        return cls(p + q, data, p, q)

    @classmethod
    def from_coefficients(cls, p: int, q: int, coeffs: np.ndarray) -> "PQForm":
        """Build from coordinates on dz^P ^ dzbar^Q; coeffs shape (n, n, n, n, m, dim)."""
        return cls.of(p, q, _apply_matrix(PQ_BASIS[(p, q)], np.asarray(coeffs, dtype=complex)))

    def coefficients(self) -> np.ndarray:
        """Coordinates on the dz^P ^ dzbar^Q basis; for (0, 2) the single c with phi = c dzbar1 ^ dzbar2."""
        basis = PQ_BASIS[self.bidegree]
        solve = np.linalg.solve(basis.conj().T @ basis, basis.conj().T)
        return _apply_matrix(solve, self.data)


def shift(data: np.ndarray, mu: int, step: int = 1) -> np.ndarray:
    """Value at x + step * e_mu."""
    return np.roll(data, -step, axis=mu)


def _bracket_potential(potential: np.ndarray, mu: int, data: np.ndarray, algebra: LieAlgebra) -> np.ndarray:
    return algebra.bracket(potential[..., mu, None, :], data)


def covariant_difference(
    data: np.ndarray, mu: int, h: float,
    potential: Optional[np.ndarray] = None, algebra: Optional[LieAlgebra] = None,
) -> np.ndarray:
    """Forward difference along mu plus [A_mu, .] evaluated at the base site."""
    out = (shift(data, mu) - data) / h
    if potential is not None:
        out = out + _bracket_potential(potential, mu, data, algebra)
    return out


def covariant_difference_adjoint(
    data: np.ndarray, mu: int, h: float,
    potential: Optional[np.ndarray] = None, algebra: Optional[LieAlgebra] = None,
) -> np.ndarray:
    """Exact lattice adjoint of covariant_difference (backward difference, minus the bracket)."""
    out = (np.roll(data, 1, axis=mu) - data) / h
    if potential is not None:
        out = out - _bracket_potential(potential, mu, data, algebra)
    return out


def exterior_derivative(
    u: LatticeForm, potential: Optional[np.ndarray] = None, algebra: Optional[LieAlgebra] = None,
) -> LatticeForm:
    if u.degree >= DIMENSION:
        raise UsageError("d is not defined on 4-forms")
    h = 1.0 / u.n
    dtype = np.result_type(u.data, potential if potential is not None else 0.0)
    out = LatticeForm.zeros(u.n, u.degree + 1, u.dim, dtype=dtype)
    for mu in range(DIMENSION):
        entries = [entry for entry in D_TABLE[u.degree] if entry[0] == mu]
        if not entries:
            continue
        grad = covariant_difference(u.data, mu, h, potential, algebra)
        for _, src, dst, sign in entries:
            out.data[..., dst, :] += sign * grad[..., src, :]
    return out


def exterior_coderivative(
    v: LatticeForm, potential: Optional[np.ndarray] = None, algebra: Optional[LieAlgebra] = None,
) -> LatticeForm:
    if v.degree <= 0:
        raise UsageError("d* is not defined on 0-forms")
    h = 1.0 / v.n
    dtype = np.result_type(v.data, potential if potential is not None else 0.0)
    out = LatticeForm.zeros(v.n, v.degree - 1, v.dim, dtype=dtype)
    for mu in range(DIMENSION):
        entries = [entry for entry in D_TABLE[v.degree - 1] if entry[0] == mu]
        if not entries:
            continue
        back = covariant_difference_adjoint(v.data, mu, h, potential, algebra)
        for _, src, dst, sign in entries:
            out.data[..., src, :] += sign * back[..., dst, :]
    return out


def d(u: LatticeForm) -> LatticeForm:
    return exterior_derivative(u)


def d_star(v: LatticeForm) -> LatticeForm:
    return exterior_coderivative(v)


def hodge_star(u: LatticeForm) -> LatticeForm:
    return LatticeForm(DIMENSION - u.degree, _apply_matrix(STAR[u.degree], u.data))


def sd_asd_project(F: LatticeForm) -> Tuple[LatticeForm, LatticeForm]:
    if F.degree != 2:
        raise UsageError("Self-dual splitting needs a 2-form")
    star_f = hodge_star(F)
    return LatticeForm(2, 0.5 * (F.data + star_f.data)), LatticeForm(2, 0.5 * (F.data - star_f.data))


def lomega(u: LatticeForm) -> LatticeForm:
    if u.degree + 2 > DIMENSION:
        raise UsageError(f"L_omega maps k -> k+2; k={u.degree} is out of range")
    return LatticeForm(u.degree + 2, _apply_matrix(LOMEGA[u.degree], u.data))


def lambda_omega(u: LatticeForm) -> LatticeForm:
    if u.degree < 2:
        raise UsageError(f"Lambda_omega maps k -> k-2; k={u.degree} is out of range")
    return LatticeForm(u.degree - 2, _apply_matrix(LOMEGA[u.degree - 2].T, u.data))


def pq_project(u: LatticeForm, p: int, q: int) -> PQForm:
    if p + q != u.degree or (p, q) not in PQ_PROJECTORS:
        raise UsageError(f"No ({p}, {q}) component in a {u.degree}-form")
    return PQForm.of(p, q, _apply_matrix(PQ_PROJECTORS[(p, q)], u.data.astype(complex, copy=False)))


def pq_components(u: LatticeForm) -> Dict[Tuple[int, int], PQForm]:
    return {pq: pq_project(u, *pq) for pq in _pq_types(u.degree)}


def pq_types(degree: int) -> List[Tuple[int, int]]:
    return _pq_types(degree)


def to_real(parts: Union[Dict[Any, LatticeForm], Sequence[LatticeForm]]) -> LatticeForm:
    forms = list(parts.values()) if isinstance(parts, dict) else list(parts)
    total = forms[0].data.astype(complex)
    for form in forms[1:]:
        total = total + form.data
    return LatticeForm(forms[0].degree, np.real(total).copy())


def conj_adjoint(phi: LatticeForm) -> LatticeForm:
    """beta -> beta* for forms valued in the compact real form (X* = -X on generators)."""
    return -phi.conj()


def pq_decompose(F: LatticeForm) -> Tuple[PQForm, PQForm, LatticeForm, PQForm]:
    """
    Returns (F20, F11_0, trace, F02) with F = F20 + F11_0 + 1/2 trace (x) omega + F02.

    trace is Lambda_omega F; F11_0 is the primitive (trace-free) part of the
    (1, 1) component.
    """
    if F.degree != 2:
        raise UsageError("The (p, q) curvature split needs a 2-form")
    trace = lambda_omega(F)
    f11 = pq_project(F, 1, 1)
    f11_0 = PQForm.of(1, 1, f11.data - 0.5 * lomega(trace).data)
    return pq_project(F, 2, 0), f11_0, trace, pq_project(F, 0, 2)


# Norms and inner products

def _field_data(u: Union[LatticeForm, np.ndarray]) -> np.ndarray:
    return u.data if isinstance(u, LatticeForm) else np.asarray(u)


def pointwise_norm_sq(u: Union[LatticeForm, np.ndarray], algebra: Optional[LieAlgebra] = None) -> np.ndarray:
    data = _field_data(u)
    scale = algebra.scale if algebra is not None else 1.0
    axes = tuple(range(DIMENSION, data.ndim))
    return scale * np.sum(np.abs(data) ** 2, axis=axes)


def lp_norm(u: Union[LatticeForm, np.ndarray], p: float = 2.0, algebra: Optional[LieAlgebra] = None) -> float:
    """(h^4 sum_x |u(x)|^p)^(1/p); p = inf gives the max norm."""
    if p < 1:
        raise UsageError(f"L^p norm needs p >= 1, got {p}")
    data = _field_data(u)
    pointwise = np.sqrt(pointwise_norm_sq(data, algebra))
    if math.isinf(p):
        return float(np.max(pointwise))
    h = 1.0 / data.shape[0]
    return float((h ** DIMENSION * np.sum(pointwise ** p)) ** (1.0 / p))


def l2_inner(
    u: Union[LatticeForm, np.ndarray], v: Union[LatticeForm, np.ndarray], algebra: Optional[LieAlgebra] = None,
) -> Union[float, complex]:
    """Hermitian L^2 product h^4 sum u conj(v); real for real fields."""
    a, b = _field_data(u), _field_data(v)
    if a.shape != b.shape:
        raise UsageError(f"Inner product of mismatched fields {a.shape} vs {b.shape}")
    scale = algebra.scale if algebra is not None else 1.0
    h = 1.0 / a.shape[0]
    value = scale * h ** DIMENSION * np.sum(a * np.conj(b))
    if np.iscomplexobj(value):
        return complex(value)
    return float(value)


def l2_norm(u: Union[LatticeForm, np.ndarray], algebra: Optional[LieAlgebra] = None) -> float:
    return lp_norm(u, 2.0, algebra)


# Logarithmic cutoff

BUMP_MASS = 35.0 / 32.0
# Half-width of the corner rounding in t = log(R/r); bounded so that R * e^width stays inside the half torus.
DEFAULT_CORNER_WIDTH = 0.5
MAX_CORNER_WIDTH = math.log(2.0)


def _bump(x: np.ndarray) -> np.ndarray:
    """C^2 density (35/32)(1 - x^2)^3 on [-1, 1]."""
    inside = np.abs(x) < 1.0
    return np.where(inside, BUMP_MASS * (1.0 - np.minimum(x ** 2, 1.0)) ** 3, 0.0)


def _bump_cdf(x: np.ndarray) -> np.ndarray:
    y = np.clip(x, -1.0, 1.0)
    return 0.5 + BUMP_MASS * (y - y ** 3 + 0.6 * y ** 5 - y ** 7 / 7.0)


def _smoothed_ramp(x: np.ndarray) -> np.ndarray:
    """max(x, 0) convolved with the unit bump."""
    y = np.clip(x, -1.0, 1.0)
    inner = 0.5 * (1.0 + y) + BUMP_MASS * (y ** 2 / 2 - y ** 4 / 4 + y ** 6 / 10 - y ** 8 / 56) - 93.0 / 256.0
    return np.where(x >= 1.0, x, np.where(x <= -1.0, 0.0, inner))


@dataclass(frozen=True)
class CutoffProfile:
    """
    Radial cutoff beta(x) = clamp(log(R/|x|) / log N), rounded at its two corners.

    In t = log(R/r) the clamp is convolved with a C^2 bump of half-width
    `width`, so beta equals the clamp exactly for t in [width, log N - width],
    is 1 on r <= (R/N) e^-width and 0 on r >= R e^width.
    """

    N: float
    R: float
    width: float = DEFAULT_CORNER_WIDTH

    def __post_init__(self):
        if self.N < 2:
            raise UsageError(f"Cutoff ratio N must be >= 2, got {self.N}")
        if not 0 < self.R <= 0.25:
            raise UsageError(f"Cutoff radius R must lie in (0, 0.25], got {self.R}")
        if not 0 < self.width <= MAX_CORNER_WIDTH:
            raise UsageError(f"Corner half-width must lie in (0, log 2], got {self.width}")

    @classmethod
    def for_grid(cls, N: float, R: float, h: float) -> "CutoffProfile":
        """Widens the corners until the inner one spans at least two lattice spacings."""
        width = max(DEFAULT_CORNER_WIDTH, math.log1p(2.0 * h * N / R))
        return cls(N, R, min(width, MAX_CORNER_WIDTH))

    @property
    def log_ratio(self) -> float:
        return math.log(self.N)

    @property
    def support(self) -> Tuple[float, float]:
        """Radii (inner, outer) outside of which beta is exactly 1 and 0."""
        return self.R / self.N * math.exp(-self.width), self.R * math.exp(self.width)

    def _scaled(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t = np.clip(np.asarray(t, dtype=float), -self.width - 1.0, self.log_ratio + self.width + 1.0)
        return t / self.width, (t - self.log_ratio) / self.width

    def profile_t(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lower, upper = self._scaled(t)
        beta = self.width * (_smoothed_ramp(lower) - _smoothed_ramp(upper)) / self.log_ratio
        beta = np.clip(beta, 0.0, 1.0)
        beta = np.where(t >= self.log_ratio + self.width, 1.0, beta)
        return np.where(t <= -self.width, 0.0, beta)

    def derivatives_t(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Closed-form (d beta/dt, d^2 beta/dt^2)."""
        lower, upper = self._scaled(t)
        beta_t = (_bump_cdf(lower) - _bump_cdf(upper)) / self.log_ratio
        beta_tt = (_bump(lower) - _bump(upper)) / (self.width * self.log_ratio)
        return beta_t, beta_tt

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            t = np.where(r > 0, np.log(self.R / np.where(r > 0, r, 1.0)), np.inf)
        return self.profile_t(t)


def cutoff_beta(
    profile: CutoffProfile, torus: Torus4, center: Sequence[int] = (0, 0, 0, 0),
) -> Tuple[LatticeForm, Dict[str, float]]:
    """
    Samples beta around a site and measures ||grad beta||_{L^4} and ||Hess beta||_{L^2}.

    Returns the scalar field (dim 1) and a dict with grad_l4, hess_l2,
    norm_sum and scaled_sum = norm_sum * sqrt(log N).
    """
    h = torus.h
    if profile.R / profile.N < 2.0 * h:
        raise UsageError(
            f"Inner plateau R/N={profile.R / profile.N:.4g} is below 2h={2 * h:.4g}; refine the grid",
            {"R": profile.R, "N": profile.N, "n": torus.n},
        )
    coords = torus.coordinates()
    offset = np.asarray(center, dtype=float).reshape(DIMENSION, 1, 1, 1, 1) * h
    delta = (coords - offset + 0.5) % 1.0 - 0.5
    radius = np.sqrt(np.sum(delta ** 2, axis=0))
    beta = profile(radius)

    grad_sq = np.zeros_like(beta)
    hess_sq = np.zeros_like(beta)
    for mu in range(DIMENSION):
        g_mu = (shift(beta, mu) - beta) / h
        grad_sq += g_mu ** 2
        for nu in range(DIMENSION):
            hess_sq += ((shift(g_mu, nu) - g_mu) / h) ** 2
    vol = torus.volume_element
    grad_l4 = float((vol * np.sum(grad_sq ** 2)) ** 0.25)
    hess_l2 = float(np.sqrt(vol * np.sum(hess_sq)))
    report = _norm_report(profile, grad_l4, hess_l2)
    logger.debug(f"Cutoff N={profile.N} R={profile.R} n={torus.n}: {report}")
    return LatticeForm.scalar(beta[..., None]), report


def _norm_report(profile: CutoffProfile, grad_l4: float, hess_l2: float) -> Dict[str, float]:
    norm_sum = grad_l4 + hess_l2
    return {
        "grad_l4": grad_l4,
        "hess_l2": hess_l2,
        "norm_sum": norm_sum,
        "scaled_sum": norm_sum * math.sqrt(profile.log_ratio),
    }


def radial_cutoff_oracle(profile: CutoffProfile, samples: int = 20001) -> Dict[str, float]:
    """
    Same norms by 1-D quadrature in t = log(R/r) with the 4-D measure 2 pi^2 r^3 dr.

    In t the integrands become beta_t^4 and (beta_tt + beta_t)^2 + 3 beta_t^2,
    evaluated from the closed-form derivatives over the support of beta_t.
    """
    sphere = 2.0 * math.pi ** 2
    t = np.linspace(-profile.width, profile.log_ratio + profile.width, samples)
    beta_t, beta_tt = profile.derivatives_t(t)
    grad_l4 = (sphere * trapezoid(beta_t ** 4, t)) ** 0.25
    hess_l2 = math.sqrt(sphere * trapezoid((beta_tt + beta_t) ** 2 + 3.0 * beta_t ** 2, t))
    return _norm_report(profile, float(grad_l4), float(hess_l2))
