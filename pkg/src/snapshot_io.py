import logging
import os
import struct
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from errors import UsageError
from lattice_geometry import DIMENSION, LatticeForm, PQForm
from lie_algebra import GroupKind

# Configure Logging
logger = logging.getLogger(__name__)

MAGIC = b"YMK1"
HEADER = struct.Struct("<4s4I")
COMPLEX_FLAG = 16


@dataclass(frozen=True)
class SnapshotHeader:
    n: int
    group: GroupKind
    degree_code: int
    components: int

    @property
    def is_complex(self) -> bool:
        return split_degree_code(self.degree_code)[1]


REAL_CODES = frozenset(list(range(DIMENSION + 1)) + [100 + 10 * p + q for p in range(3) for q in range(3)])


def split_degree_code(code: int) -> Tuple[int, bool]:
    """(base code, complex flag) for a header degree code."""
    if code in REAL_CODES:
        return code, False
    if code - COMPLEX_FLAG in REAL_CODES:
        return code - COMPLEX_FLAG, True
    raise UsageError(f"Unknown snapshot degree code {code}")


def degree_code_for(form: LatticeForm) -> int:
    """k for real k-forms, 100 + 10 p + q for (p, q)-forms, + 16 for complex data."""
    if isinstance(form, PQForm):
        code = 100 + 10 * form.p + form.q
    else:
        code = form.degree
    return code + COMPLEX_FLAG if form.is_complex else code


def _decode_degree(code: int) -> Tuple[int, Optional[Tuple[int, int]]]:
    if code >= 100:
        p, q = divmod(code - 100, 10)
        return p + q, (p, q)
    return code, None


def snapshot_bytes(data: np.ndarray, group: Union[GroupKind, str], degree_code: int) -> bytes:
    """
    Encodes a field of shape (n, n, n, n, C, dim).

    The component count in the header is C * dim. Complex data must carry
    the complex flag; its payload is the real parts followed by the imaginary
    parts.
    """
    group = GroupKind.parse(group)
    data = np.asarray(data)
    if data.ndim != DIMENSION + 2 or len(set(data.shape[:DIMENSION])) != 1:
        raise UsageError(f"Snapshot data must have shape (n, n, n, n, C, dim), got {data.shape}")
    if np.iscomplexobj(data) != split_degree_code(degree_code)[1]:
        raise UsageError(f"Degree code {degree_code} does not match the dtype {data.dtype}")
    n = data.shape[0]
    components = data.shape[DIMENSION] * data.shape[DIMENSION + 1]
    header = HEADER.pack(MAGIC, n, group.value, degree_code, components)
    if np.iscomplexobj(data):
        payload = np.concatenate([np.real(data).ravel(), np.imag(data).ravel()])
    else:
        payload = data.ravel()
    return header + np.ascontiguousarray(payload, dtype="<f8").tobytes()


def parse_snapshot(raw: bytes, dim: Optional[int] = None) -> Tuple[np.ndarray, SnapshotHeader]:
    if len(raw) < HEADER.size:
        raise UsageError("Snapshot is shorter than its header")
    magic, n, tag, code, components = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise UsageError(f"Bad snapshot magic {magic!r}")
    try:
        group = GroupKind(tag)
    except ValueError as e:
        raise UsageError(f"Unknown group tag {tag} in snapshot") from e
    header = SnapshotHeader(n, group, code, components)
    _, complex_valued = split_degree_code(code)
    expected = n ** DIMENSION * components * (2 if complex_valued else 1)
    payload = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if payload.size != expected:
        raise UsageError(f"Snapshot payload has {payload.size} values, header implies {expected}")
    dim = dim or group.dim
    if components % dim:
        raise UsageError(f"Component count {components} is not a multiple of dim {dim}")
    shape = (n,) * DIMENSION + (components // dim, dim)
    if complex_valued:
        half = expected // 2
        data = payload[:half].reshape(shape) + 1j * payload[half:].reshape(shape)
    else:
        data = payload.reshape(shape).copy()
    return data, header


def write_snapshot(path: str, data: np.ndarray, group: Union[GroupKind, str], degree_code: int) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(snapshot_bytes(data, group, degree_code))
    logger.info(f"Snapshot written to {path}")
    return path


def read_snapshot(path: str) -> Tuple[np.ndarray, SnapshotHeader]:
    if not os.path.exists(path):
        raise UsageError(f"Snapshot not found: {path}")
    with open(path, "rb") as f:
        return parse_snapshot(f.read())


def write_form(path: str, form: LatticeForm, group: Union[GroupKind, str]) -> str:
    return write_snapshot(path, form.data, group, degree_code_for(form))


def read_form(path: str) -> Tuple[LatticeForm, GroupKind]:
    data, header = read_snapshot(path)
    base, _ = split_degree_code(header.degree_code)
    degree, pq = _decode_degree(base)
    if pq is not None:
        return PQForm.of(pq[0], pq[1], data), header.group
    return LatticeForm(degree, data), header.group
