import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from errors import UsageError

# Configure Logging
logger = logging.getLogger(__name__)


class GroupKind(Enum):
    SU2 = 0
    SO3 = 1
    U1 = 2

    @property
    def dim(self) -> int:
        return 1 if self is GroupKind.U1 else 3

    @property
    def abelian(self) -> bool:
        return self is GroupKind.U1

    @classmethod
    def parse(cls, value: Union[str, int, "GroupKind"]) -> "GroupKind":
        if isinstance(value, GroupKind):
            return value
        if isinstance(value, int):
            try:
                return cls(value)
            except ValueError:
                raise UsageError(f"Unknown group tag: {value}")
        key = str(value).strip().upper().replace("(", "").replace(")", "")
        if key not in cls.__members__:
            raise UsageError(f"Unknown group: {value!r} (expected SU2, SO3 or U1)")
        return cls[key]


class LieAlgebra:
    """
    Field-level kernel for su(2), so(3) and u(1) in coefficient form.

    Values are arrays whose last axis holds the coefficients in an orthonormal
    basis. su(2) and so(3) share the structure constants eps_ijk, so the
    bracket is the cross product; u(1) is abelian. The inner product is
    `scale` times the Euclidean one, which keeps it ad-invariant for any
    positive scale.
    """

    def __init__(self, kind: Union[GroupKind, str] = GroupKind.SU2, scale: float = 1.0):
        self.kind = GroupKind.parse(kind)
        if scale <= 0:
            raise UsageError(f"Inner-product scale must be positive, got {scale}")
        self.scale = float(scale)

    @property
    def dim(self) -> int:
        return self.kind.dim

    def __repr__(self) -> str:
        return f"LieAlgebra({self.kind.name}, scale={self.scale})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LieAlgebra) and other.kind is self.kind and other.scale == self.scale

    def __hash__(self) -> int:
        return hash((self.kind, self.scale))

    def structure_constants(self) -> np.ndarray:
        """f[i, j, k] with [e_i, e_j] = sum_k f[i, j, k] e_k."""
        d = self.dim
        f = np.zeros((d, d, d))
        if not self.kind.abelian:
            for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
                f[i, j, k] = 1.0
                f[j, i, k] = -1.0
        return f

    def basis(self, index: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[index] = 1.0
        return e

    def bracket(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pointwise [a, b]; broadcasts over leading axes and works for complex input."""
        if self.kind.abelian:
            shape = np.broadcast_shapes(np.shape(a), np.shape(b))
            return np.zeros(shape, dtype=np.result_type(a, b))
        return np.cross(a, b)

    def inner(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pointwise real inner product, summed over the coefficient axis."""
        return self.scale * np.sum(a * b, axis=-1)

    def hermitian(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Pointwise Hermitian product <a, b> = scale * sum a_i conj(b_i)."""
        return self.scale * np.sum(a * np.conj(b), axis=-1)

    def norm_sq(self, a: np.ndarray) -> np.ndarray:
        return self.scale * np.sum(np.abs(a) ** 2, axis=-1)


# Single-element API

@dataclass(frozen=True)
class LieElement:
    kind: GroupKind
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.kind.dim,):
            raise UsageError(f"{self.kind.name} element needs {self.kind.dim} coefficients, got shape {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def basis(cls, kind: GroupKind, index: int) -> "LieElement":
        return cls(kind, LieAlgebra(kind).basis(index))


@dataclass(frozen=True)
class CLieElement:
    """Element of the complexified algebra, stored as its real and imaginary parts."""

    kind: GroupKind
    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.asarray(self.re, dtype=float)
        im = np.asarray(self.im, dtype=float)
        if re.shape != (self.kind.dim,) or im.shape != (self.kind.dim,):
            raise UsageError(f"{self.kind.name} complex element needs two length-{self.kind.dim} parts")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @property
    def value(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, kind: GroupKind, value: np.ndarray) -> "CLieElement":
        value = np.asarray(value, dtype=complex)
        return cls(kind, value.real, value.imag)


def _check_kinds(a, b) -> GroupKind:
    if a.kind is not b.kind:
        raise UsageError(f"GroupKind mismatch: {a.kind.name} vs {b.kind.name}")
    return a.kind


def bracket(a: LieElement, b: LieElement) -> LieElement:
    kind = _check_kinds(a, b)
    return LieElement(kind, LieAlgebra(kind).bracket(a.coeffs, b.coeffs))


def inner(a: LieElement, b: LieElement) -> float:
    kind = _check_kinds(a, b)
    return float(LieAlgebra(kind).inner(a.coeffs, b.coeffs))


def embed(a: LieElement) -> CLieElement:
    """Real algebra into its complexification, a -> (a, 0)."""
    return CLieElement(a.kind, a.coeffs, np.zeros_like(a.coeffs))


def cbracket(a: CLieElement, b: CLieElement) -> CLieElement:
    kind = _check_kinds(a, b)
    return CLieElement.from_complex(kind, LieAlgebra(kind).bracket(a.value, b.value))


def cinner(a: CLieElement, b: CLieElement) -> complex:
    kind = _check_kinds(a, b)
    return complex(LieAlgebra(kind).hermitian(a.value, b.value))
