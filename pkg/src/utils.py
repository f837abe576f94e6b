import hashlib
import logging
import os
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator

import numpy as np

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

PROGRAM_NAME = "ymk-lab"
PROGRAM_VERSION = "1.0.0"


def set_verbosity(verbose: bool) -> None:
    """Switches the root logger between INFO and DEBUG."""
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


def get_worker_count() -> int:
    """
    Number of workers allowed for cell-parallel runs.

    Reads YMK_THREADS; falls back to the CPU count. Invalid values are
    logged and ignored.
    """
    default = os.cpu_count() or 1
    raw = os.getenv("YMK_THREADS")
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer YMK_THREADS={raw!r}")
        return default
    if value < 1:
        logger.warning(f"Ignoring YMK_THREADS={value}; must be >= 1")
        return default
    return value


def array_digest(*arrays: np.ndarray) -> str:
    """sha256 over the raw little-endian bytes of the given arrays."""
    digest = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        digest.update(str(arr.dtype).encode("ascii"))
        digest.update(str(arr.shape).encode("ascii"))
        digest.update(arr.tobytes())
    return digest.hexdigest()


@contextmanager
def timed() -> Iterator[Dict[str, Any]]:
    """
    Collects wall and CPU time for a block into a dict.

    The dict is filled on exit with duration_ms and cpu_time_ms, the same
    keys the record stream stores under "execution".
    """
    execution_data: Dict[str, Any] = {}
    start_wall = time.perf_counter()
    start_cpu = time.process_time()
    try:
        yield execution_data
    finally:
        execution_data["duration_ms"] = round((time.perf_counter() - start_wall) * 1000.0, 3)
        execution_data["cpu_time_ms"] = round((time.process_time() - start_cpu) * 1000.0, 3)
