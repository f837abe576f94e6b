import csv
import hashlib
import json
import logging
import os
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from errors import UsageError
from utils import PROGRAM_NAME, PROGRAM_VERSION

# Configure Logging
logger = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"

# Plot-data column sets, also listed in the CLI help.
GAP_COLUMNS = [
    "seed", "amplitude", "grad_tol", "fplus_norm", "trace_before", "trace_after", "dbar_star_f02",
    "f_d", "f_d_star", "lambda", "mu", "reducible", "status",
]
CONTINUITY_COLUMNS = ["t", "a_l4", "lambda", "mu", "d_lambda", "d_mu"]
CUTOFF_COLUMNS = ["N", "R", "grad_l4", "hess_l2", "norm_sum", "scaled_sum", "source"]
DEFORM_TRACE_COLUMNS = ["k", "trace_norm"]

_append_lock = threading.Lock()


def _jsonable(value: Any) -> Any:
    """Converts numpy scalars and arrays, and non-finite floats, for the JSON encoder."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def canonical_json(payload: Any) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_digest(payload: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON payload; the timestamp is not part of it."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def make_run_id(command: str, config: Dict[str, Any]) -> str:
    text = command + "\n" + canonical_json(config)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class ExperimentRecord:
    """One line of the record stream."""

    command: str
    config: Dict[str, Any]
    payload: Dict[str, Any]
    status: str = "ok"
    run_id: str = ""
    timestamp_utc: str = ""
    program: str = PROGRAM_NAME
    version: str = PROGRAM_VERSION
    execution: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.run_id:
            self.run_id = make_run_id(self.command, self.config)
        if not self.timestamp_utc:
            self.timestamp_utc = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")

    def to_json(self) -> str:
        return canonical_json(asdict(self))


def append_record(path: str, record: ExperimentRecord) -> None:
    """
    Appends one record as a JSON line.

    Appends from pool workers are serialized by a module lock.
    """
    line = record.to_json()
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with _append_lock:
        with open(path, "a", encoding="utf-8") as f:
            f.write(line + "\n")
    logger.info(f"Record written: {record.command} [{record.status}] -> {path}")


def load_records(path: str) -> List[Dict[str, Any]]:
    if not os.path.exists(path):
        return []
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                logger.error(f"Corrupt record at {path}:{number}: {e}")
                raise UsageError(f"Corrupt record at line {number} of {path}") from e
    return records


def write_csv_table(path: str, rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> int:
    """Writes plot-data rows restricted to the given columns; returns the row count."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            clean = _jsonable({k: row.get(k) for k in columns})
            writer.writerow(clean)
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return count


def read_csv_table(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def records_path(out_dir: str, filename: Optional[str] = None) -> str:
    return os.path.join(out_dir, filename or RECORDS_FILE)
