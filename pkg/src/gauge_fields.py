import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from errors import UsageError
from lattice_geometry import (
    DIMENSION, INDEX_OF, MULTI_INDICES, PQ_PROJECTORS,
    LatticeForm, PQForm, Torus4, _apply_matrix, _wedge_tensor,
    covariant_difference, covariant_difference_adjoint,
    exterior_coderivative, exterior_derivative, l2_norm, lp_norm, n_components,
    pq_decompose, pq_types, sd_asd_project, shift,
)
from lie_algebra import GroupKind, LieAlgebra

# Configure Logging
logger = logging.getLogger(__name__)

# tr(XY) = TRACE_PAIRING * <X, Y>; fixes int tr(F^F) = ||F-||^2 - ||F+||^2.
TRACE_PAIRING = -1.0


@dataclass(eq=False)
class Connection:
    """Lie-algebra-valued 1-form A_mu(x) on the trivial bundle over the torus."""

    algebra: LieAlgebra
    a: LatticeForm

    def __post_init__(self):
        if self.a.degree != 1:
            raise UsageError(f"A connection is a 1-form, got degree {self.a.degree}")
        if self.a.dim != self.algebra.dim:
            raise UsageError(f"Connection has {self.a.dim} generators, {self.algebra.kind.name} needs {self.algebra.dim}")
        if self.a.is_complex:
            raise UsageError("Connection potential must be real")
        if not np.all(np.isfinite(self.a.data)):
            raise UsageError("Connection potential has non-finite components")

    @classmethod
    def zeros(cls, n: int, algebra: LieAlgebra) -> "Connection":
        return cls(algebra, LatticeForm.zeros(n, 1, algebra.dim))

    @classmethod
    def from_potential(cls, potential: np.ndarray, algebra: LieAlgebra) -> "Connection":
        return cls(algebra, LatticeForm(1, np.asarray(potential, dtype=float)))

    @property
    def n(self) -> int:
        return self.a.n

    @property
    def torus(self) -> Torus4:
        return self.a.torus

    @property
    def kind(self) -> GroupKind:
        return self.algebra.kind

    @property
    def potential(self) -> np.ndarray:
        """Shape (n, n, n, n, 4, dim)."""
        return self.a.data

    def shifted(self, delta: LatticeForm) -> "Connection":
        """A + delta for a real 1-form delta."""
        return Connection(self.algebra, LatticeForm(1, self.a.data + np.real(delta.data)))

    def copy(self) -> "Connection":
        return Connection(self.algebra, self.a.copy())


@dataclass
class CurvatureSplit:
    F: LatticeForm
    F20: PQForm
    F11_0: PQForm
    trace: LatticeForm
    F02: PQForm
    Fplus: LatticeForm
    Fminus: LatticeForm


@dataclass(eq=False)
class GaugeTransform:
    """
    Site-wise group element.

    SU2/SO3: unit quaternions, shape (n, n, n, n, 4) as (q0, q1, q2, q3),
    SO3 acting through its double cover. U1: unit complex phases, shape
    (n, n, n, n).
    """

    kind: GroupKind
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if self.kind.abelian:
            if values.ndim != DIMENSION:
                raise UsageError(f"U1 gauge transform needs shape (n, n, n, n), got {values.shape}")
            values = values.astype(complex)
        elif values.ndim != DIMENSION + 1 or values.shape[-1] != 4:
            raise UsageError(f"Quaternion gauge transform needs shape (n, n, n, n, 4), got {values.shape}")
        self.values = values

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def identity(cls, n: int, kind: GroupKind) -> "GaugeTransform":
        if kind.abelian:
            return cls(kind, np.ones((n,) * DIMENSION, dtype=complex))
        values = np.zeros((n,) * DIMENSION + (4,))
        values[..., 0] = 1.0
        return cls(kind, values)

    @classmethod
    def constant(cls, n: int, kind: GroupKind, element: Union[complex, np.ndarray]) -> "GaugeTransform":
        if kind.abelian:
            return cls(kind, np.full((n,) * DIMENSION, complex(element)))
        quat = np.asarray(element, dtype=float)
        return cls(kind, np.broadcast_to(quat / np.linalg.norm(quat), (n,) * DIMENSION + (4,)).copy())

    @classmethod
    def exponential(cls, xi: np.ndarray, kind: GroupKind) -> "GaugeTransform":
        """exp of an algebra field xi with shape (n, n, n, n, dim)."""
        if kind.abelian:
            return cls(kind, np.exp(1j * xi[..., 0]))
        theta = 0.5 * np.linalg.norm(xi, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            axis = np.where(theta[..., None] > 0, xi / (2.0 * theta[..., None]), 0.0)
        quat = np.concatenate([np.cos(theta)[..., None], np.sin(theta)[..., None] * axis], axis=-1)
        return cls(kind, quat)

    def unitarity_defect(self) -> float:
        if self.kind.abelian:
            return float(np.max(np.abs(np.abs(self.values) - 1.0)))
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=-1) - 1.0)))


def _quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p0, pv = p[..., :1], p[..., 1:]
    q0, qv = q[..., :1], q[..., 1:]
    scalar = p0 * q0 - np.sum(pv * qv, axis=-1, keepdims=True)
    vector = p0 * qv + q0 * pv + np.cross(pv, qv)
    return np.concatenate([scalar, vector], axis=-1)


def _quat_conj(q: np.ndarray) -> np.ndarray:
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def _adjoint_rotation(q: np.ndarray) -> np.ndarray:
    """Ad(q) on coefficient vectors, shape (..., 3, 3)."""
    q0 = q[..., 0]
    qv = q[..., 1:]
    eye = np.eye(3)
    outer = qv[..., :, None] * qv[..., None, :]
    cross = np.zeros(q.shape[:-1] + (3, 3))
    cross[..., 0, 1], cross[..., 0, 2] = -qv[..., 2], qv[..., 1]
    cross[..., 1, 0], cross[..., 1, 2] = qv[..., 2], -qv[..., 0]
    cross[..., 2, 0], cross[..., 2, 1] = -qv[..., 1], qv[..., 0]
    scalar = (q0 ** 2 - np.sum(qv ** 2, axis=-1))[..., None, None]
    return scalar * eye + 2.0 * outer + 2.0 * q0[..., None, None] * cross


def apply_gauge(A: Connection, g: GaugeTransform) -> Connection:
    """A -> g A g^-1 - (dg) g^-1 with the forward difference of g."""
    if g.kind is not A.kind:
        raise UsageError(f"Gauge transform is {g.kind.name}, connection is {A.kind.name}")
    if g.n != A.n:
        raise UsageError(f"Gauge transform grid {g.n} does not match connection grid {A.n}")
    h = A.torus.h
    out = np.empty_like(A.potential)
    if A.kind.abelian:
        theta = np.angle(g.values)
        for mu in range(DIMENSION):
            step = np.roll(theta, -1, axis=mu) - theta
            step = (step + math.pi) % (2.0 * math.pi) - math.pi
            out[..., mu, 0] = A.potential[..., mu, 0] - step / h
        return Connection(A.algebra, LatticeForm(1, out))

    rotation = _adjoint_rotation(g.values)
    inverse = _quat_conj(g.values)
    for mu in range(DIMENSION):
        rotated = np.einsum("...ij,...j->...i", rotation, A.potential[..., mu, :])
        transport = _quat_mul(np.roll(g.values, -1, axis=mu), inverse)
        out[..., mu, :] = rotated - 2.0 * transport[..., 1:] / h
    return Connection(A.algebra, LatticeForm(1, out))


# Curvature and covariant operators

def curvature(A: Connection) -> LatticeForm:
    """F_{mu nu} = D_mu A_nu - D_nu A_mu + [A_mu, A_nu] with forward differences."""
    F = exterior_derivative(A.a)
    pot = A.potential
    for j, (mu, nu) in enumerate(MULTI_INDICES[2]):
        F.data[..., j, :] += A.algebra.bracket(pot[..., mu, :], pot[..., nu, :])
    return F


def centered_curvature(A: Connection) -> LatticeForm:
    """
    F_{mu nu} with central differences, all terms at the base site.

    This is the curvature seen by the commutator of a forward and a backward
    covariant difference; it equals curvature(A) when A is constant.
    """
    pot = A.potential
    h = A.torus.h
    F = LatticeForm.zeros(A.n, 2, A.algebra.dim)
    for j, (mu, nu) in enumerate(MULTI_INDICES[2]):
        d_mu = (shift(pot[..., nu, :], mu) - shift(pot[..., nu, :], mu, -1)) / (2.0 * h)
        d_nu = (shift(pot[..., mu, :], nu) - shift(pot[..., mu, :], nu, -1)) / (2.0 * h)
        F.data[..., j, :] = d_mu - d_nu + A.algebra.bracket(pot[..., mu, :], pot[..., nu, :])
    return F


def dA(u: LatticeForm, A: Connection) -> LatticeForm:
    return exterior_derivative(u, A.potential, A.algebra)


def dA_star(v: LatticeForm, A: Connection) -> LatticeForm:
    return exterior_coderivative(v, A.potential, A.algebra)


def yang_mills_gradient(A: Connection, F: Optional[LatticeForm] = None) -> LatticeForm:
    """d_A* F_A, the L^2 gradient of half the Yang-Mills energy."""
    return dA_star(curvature(A) if F is None else F, A)


def _dolbeault(u: LatticeForm, A: Connection, holomorphic: bool, adjoint: bool) -> LatticeForm:
    sources = [u.bidegree] if isinstance(u, PQForm) else pq_types(u.degree)
    step = -1 if adjoint else 1
    data = u.data.astype(complex, copy=False)
    out, targets = None, []
    for p, q in sources:
        target = (p + step, q) if holomorphic else (p, q + step)
        if target not in PQ_PROJECTORS:
            continue
        piece = LatticeForm(u.degree, _apply_matrix(PQ_PROJECTORS[(p, q)], data))
        moved = dA_star(piece, A) if adjoint else dA(piece, A)
        projected = _apply_matrix(PQ_PROJECTORS[target], moved.data)
        out = projected if out is None else out + projected
        targets.append(target)
    degree = u.degree + step
    if degree < 0 or degree > DIMENSION:
        raise UsageError(f"Dolbeault operator leaves the form degrees from degree {u.degree}")
    if out is None:
        out = LatticeForm.zeros(u.n, degree, u.dim, dtype=complex).data
    if len(set(targets)) == 1:
        return PQForm.of(*targets[0], out)
    if not targets and isinstance(u, PQForm):
        p, q = u.bidegree
        target = (p + step, q) if holomorphic else (p, q + step)
        if target[0] >= 0 and target[1] >= 0 and target in PQ_PROJECTORS:
            return PQForm.of(*target, out)
    return LatticeForm(degree, out)


def delbar(u: LatticeForm, A: Connection) -> LatticeForm:
    return _dolbeault(u, A, holomorphic=False, adjoint=False)


def delbar_star(u: LatticeForm, A: Connection) -> LatticeForm:
    return _dolbeault(u, A, holomorphic=False, adjoint=True)


def del_(u: LatticeForm, A: Connection) -> LatticeForm:
    return _dolbeault(u, A, holomorphic=True, adjoint=False)


def del_star(u: LatticeForm, A: Connection) -> LatticeForm:
    return _dolbeault(u, A, holomorphic=True, adjoint=True)


def dolbeault_laplacian(u: LatticeForm, A: Connection) -> LatticeForm:
    """delbar delbar* + delbar* delbar."""
    total = np.zeros(u.data.shape, dtype=complex)
    if u.degree > 0:
        total += delbar(delbar_star(u, A), A).data
    if u.degree < DIMENSION:
        total += delbar_star(delbar(u, A), A).data
    return u._like(total) if isinstance(u, PQForm) else LatticeForm(u.degree, total)


def _field(u: Union[LatticeForm, np.ndarray]) -> np.ndarray:
    return u.data if isinstance(u, LatticeForm) else np.asarray(u)


def nabla(u: Union[LatticeForm, np.ndarray], A: Connection) -> np.ndarray:
    """
    Full covariant derivative.

    For input of shape (n, n, n, n, *mid, dim) returns (n, n, n, n, 4, *mid, dim),
    the direction index placed right after the site axes.
    """
    data = _field(u)
    site, tail = data.shape[:DIMENSION], data.shape[DIMENSION:]
    flat = data.reshape(site + (-1, tail[-1]))
    h = A.torus.h
    parts = [covariant_difference(flat, mu, h, A.potential, A.algebra).reshape(data.shape) for mu in range(DIMENSION)]
    return np.stack(parts, axis=DIMENSION)


def nabla_star(g: np.ndarray, A: Connection) -> np.ndarray:
    """Exact adjoint of nabla: (n, n, n, n, 4, *mid, dim) -> (n, n, n, n, *mid, dim)."""
    g = np.asarray(g)
    out_shape = g.shape[:DIMENSION] + g.shape[DIMENSION + 1:]
    h = A.torus.h
    total = None
    for mu in range(DIMENSION):
        flat = g.take(mu, axis=DIMENSION).reshape(g.shape[:DIMENSION] + (-1, g.shape[-1]))
        term = covariant_difference_adjoint(flat, mu, h, A.potential, A.algebra)
        total = term if total is None else total + term
    return total.reshape(out_shape)


def laplacian_nabla(u: LatticeForm, A: Connection) -> LatticeForm:
    """nabla_A* nabla_A u; commutes with the (p, q) projectors, so the type of u is kept."""
    return u._like(nabla_star(nabla(u, A), A))


def _project_directions(g: np.ndarray) -> np.ndarray:
    moved = np.moveaxis(g.astype(complex, copy=False), DIMENSION, -1)
    return np.moveaxis(moved @ PQ_PROJECTORS[(0, 1)].T, -1, DIMENSION)


def nabla_bar(u: Union[LatticeForm, np.ndarray], A: Connection) -> np.ndarray:
    """(0, 1)-part of the covariant derivative, projected on the direction axis."""
    return _project_directions(nabla(u, A))


def nabla_bar_star(g: np.ndarray, A: Connection) -> np.ndarray:
    return nabla_star(_project_directions(np.asarray(g)), A)


def laplacian_nabla_bar(u: LatticeForm, A: Connection) -> LatticeForm:
    return u._like(nabla_bar_star(nabla_bar(u, A), A))


def bracket_with_trace(trace: LatticeForm, phi: LatticeForm, algebra: LieAlgebra, factor: complex = 1j) -> LatticeForm:
    """[factor * trace, phi] for a 0-form trace acting on every component of phi."""
    return phi._like(algebra.bracket(factor * trace.data, phi.data))


# Energies

def ym_energy(A: Connection, F: Optional[LatticeForm] = None) -> float:
    F = curvature(A) if F is None else F
    return l2_norm(F, A.algebra) ** 2


def topological_term(F: LatticeForm, algebra: LieAlgebra) -> float:
    """int tr(F ^ F) from the wedge table, using TRACE_PAIRING."""
    top_slot = INDEX_OF[DIMENSION][tuple(range(DIMENSION))]
    wedge = _wedge_tensor(2, 2)[top_slot]
    density = np.einsum("ij,...ia,...ja->...", wedge, F.data, F.data)
    h = 1.0 / F.n
    return float(TRACE_PAIRING * algebra.scale * h ** DIMENSION * np.sum(density))


def energy_split(A: Connection, F: Optional[LatticeForm] = None) -> Dict[str, float]:
    """
    Terms of YM = 4 ||F02||^2 + ||Lambda F||^2 + int tr(F ^ F).

    Returns f02_sq, trace_sq and topological; ym is included for reference.
    """
    F = curvature(A) if F is None else F
    _, _, trace, f02 = pq_decompose(F)
    return {
        "f02_sq": l2_norm(f02, A.algebra) ** 2,
        "trace_sq": l2_norm(trace, A.algebra) ** 2,
        "topological": topological_term(F, A.algebra),
        "ym": l2_norm(F, A.algebra) ** 2,
    }


def curvature_split(A: Connection, F: Optional[LatticeForm] = None) -> CurvatureSplit:
    F = curvature(A) if F is None else F
    f20, f11_0, trace, f02 = pq_decompose(F)
    fplus, fminus = sd_asd_project(F)
    return CurvatureSplit(F, f20, f11_0, trace, f02, fplus, fminus)


def sobolev_norm(u: LatticeForm, A: Connection, p: float = 2.0, k: int = 2) -> float:
    """||u||_{L^p_{k,A}} = (sum_{j <= k} ||nabla_A^j u||_p^p)^(1/p)."""
    if k < 0:
        raise UsageError(f"Sobolev order must be >= 0, got {k}")
    current = u.data
    total = lp_norm(current, p, A.algebra) ** p
    for _ in range(k):
        current = nabla(current, A)
        total += lp_norm(current, p, A.algebra) ** p
    return float(total ** (1.0 / p))


# Field generators

def _band_limited_field(n: int, tail: Tuple[int, ...], rng: np.random.Generator, smoothness: int) -> np.ndarray:
    """
    Real field Re sum_k c_k exp(2 pi i k.x) over |k|_inf <= smoothness.

    The modes are drawn in a fixed order independent of n, so the same seed
    describes the same continuum field on every grid.
    """
    if smoothness < 0:
        raise UsageError(f"Mode cutoff must be >= 0, got {smoothness}")
    modes = np.arange(-smoothness, smoothness + 1)
    grid_k = np.stack(np.meshgrid(modes, modes, modes, modes, indexing="ij"), axis=-1).reshape(-1, DIMENSION)
    size = int(np.prod(tail))
    coeffs = rng.standard_normal((len(grid_k), size)) + 1j * rng.standard_normal((len(grid_k), size))
    weight = 1.0 / (1.0 + np.sum(grid_k ** 2, axis=-1))
    coeffs = coeffs * weight[:, None]

    spectrum = np.zeros((n,) * DIMENSION + (size,), dtype=complex)
    idx = tuple((grid_k % n).T)
    np.add.at(spectrum, idx, coeffs)
    field = np.real(np.fft.ifftn(spectrum, axes=tuple(range(DIMENSION)))) * n ** DIMENSION
    return field.reshape((n,) * DIMENSION + tail)


def _scale_to_amplitude(field: np.ndarray, amplitude: float, trailing: int) -> np.ndarray:
    axes = tuple(range(DIMENSION, DIMENSION + trailing))
    peak = float(np.max(np.sqrt(np.sum(field ** 2, axis=axes))))
    if peak == 0.0:
        return np.zeros_like(field)
    return field * (amplitude / peak)


def random_connection(
    n: int, algebra: LieAlgebra, seed: int, amplitude: float, smoothness: int = 2,
) -> Connection:
    """Band-limited random connection with pointwise max norm equal to amplitude; amplitude 0 is the zero connection."""
    if amplitude < 0:
        raise UsageError(f"Amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return Connection.zeros(n, algebra)
    rng = np.random.default_rng(seed)
    field = _band_limited_field(n, (DIMENSION, algebra.dim), rng, smoothness)
    potential = _scale_to_amplitude(field, amplitude, 2)
    logger.debug(f"random_connection n={n} seed={seed} amplitude={amplitude} smoothness={smoothness}")
    return Connection.from_potential(potential, algebra)


def constant_connection(n: int, algebra: LieAlgebra, strength: float) -> Connection:
    """A_mu = strength * E_mu with E the fixed frame e1, e2, e3, (e1 + e2)/sqrt 2."""
    potential = np.zeros((n,) * DIMENSION + (DIMENSION, algebra.dim))
    potential[...] = strength * _trig_frame(algebra)
    return Connection.from_potential(potential, algebra)


def kahler_background(n: int, algebra: LieAlgebra, strength: float) -> Connection:
    """
    Constant A = strength * (e1, e2, e2, e1) with Lambda_omega F = 0.

    F01 and F23 cancel, so Lambda F of a perturbed background is linear in
    the perturbation at leading order; for su2 and so3 the connection is
    irreducible with lambda(A) of order strength^2.
    """
    if algebra.kind.abelian:
        raise UsageError("kahler_background needs a nonabelian algebra")
    frame = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    potential = np.zeros((n,) * DIMENSION + (DIMENSION, algebra.dim))
    potential[...] = strength * frame
    return Connection.from_potential(potential, algebra)


def random_form(
    n: int, degree: int, algebra: LieAlgebra, seed: int, amplitude: float = 1.0, smoothness: int = 2,
) -> LatticeForm:
    """Smooth real k-form with the same generator as random_connection."""
    rng = np.random.default_rng(seed)
    field = _band_limited_field(n, (n_components(degree), algebra.dim), rng, smoothness)
    return LatticeForm(degree, _scale_to_amplitude(field, amplitude, 2))


def random_smooth_gauge(
    n: int, kind: GroupKind, seed: int, amplitude: float = 1.0, smoothness: int = 1,
) -> GaugeTransform:
    """exp of a band-limited algebra field; amplitude bounds the rotation angle."""
    rng = np.random.default_rng(seed)
    xi = _band_limited_field(n, (kind.dim,), rng, smoothness)
    return GaugeTransform.exponential(_scale_to_amplitude(xi, amplitude, 1), kind)


def _trig_frame(algebra: LieAlgebra) -> np.ndarray:
    if algebra.kind.abelian:
        return np.ones((DIMENSION, 1))
    frame = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    return frame / np.linalg.norm(frame, axis=1, keepdims=True)


def trigonometric_connection(n: int, algebra: LieAlgebra, amplitude: float = 0.5) -> Connection:
    """A_mu(x) = amplitude * sin(2 pi x_{mu+1}) E_mu for a fixed frame E."""
    coords = Torus4(n).coordinates()
    frame = _trig_frame(algebra)
    potential = np.zeros((n,) * DIMENSION + (DIMENSION, algebra.dim))
    for mu in range(DIMENSION):
        wave = amplitude * np.sin(2.0 * math.pi * coords[(mu + 1) % DIMENSION])
        potential[..., mu, :] = wave[..., None] * frame[mu]
    return Connection.from_potential(potential, algebra)


def trigonometric_curvature(n: int, algebra: LieAlgebra, amplitude: float = 0.5) -> LatticeForm:
    """Continuum curvature of trigonometric_connection sampled at the sites."""
    coords = Torus4(n).coordinates()
    frame = _trig_frame(algebra)
    pot = trigonometric_connection(n, algebra, amplitude).potential
    F = LatticeForm.zeros(n, 2, algebra.dim)

    def derivative(mu: int, nu: int) -> np.ndarray:
        axis = (nu + 1) % DIMENSION
        if mu != axis:
            return np.zeros(coords.shape[1:] + (algebra.dim,))
        wave = amplitude * 2.0 * math.pi * np.cos(2.0 * math.pi * coords[axis])
        return wave[..., None] * frame[nu]

    for j, (mu, nu) in enumerate(MULTI_INDICES[2]):
        F.data[..., j, :] = (
            derivative(mu, nu) - derivative(nu, mu) + algebra.bracket(pot[..., mu, :], pot[..., nu, :])
        )
    return F
