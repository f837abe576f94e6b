import json
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional

from deform import DeformConfig, DeformMode, FlowConfig, FlowMethod
from errors import ConfigError, YMKError
from lie_algebra import GroupKind
from spectral import SpectralConfig

# Configure Logging
logger = logging.getLogger(__name__)

CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "default_config.json")

# Every accepted key with its built-in default. Files are merged over this.
DEFAULTS: Dict[str, Any] = {
    "grid.n": 8,
    "grid.group": "SU2",
    "field.seed": 0,
    "field.amplitude": 0.05,
    "field.smoothness": 2,
    **{f"spectral.{f.name}": f.default for f in fields(SpectralConfig) if f.name != "seed"},
    "deform.mode": DeformMode.DISCRETE_RESIDUAL.value,
    "deform.tol": 1e-8,
    "deform.max_outer": 50,
    "deform.rho_max": 0.5,
    "deform.lambda_floor": 1e-4,
    "deform.correction": "adjoint",
    "deform.f02_p": 4.0,
    "flow.dt": None,
    "flow.max_steps": 5000,
    "flow.grad_tol": 1e-6,
    "flow.backtracking": True,
    "flow.max_rejections": 20,
    "flow.armijo": 1e-4,
    "flow.method": FlowMethod.CONJUGATE_GRADIENT.value,
    "flow.growth": 1.5,
    "cutoff.N": [4, 16, 64],
    "cutoff.R": 0.25,
    "cutoff.grid_n": 16,
    "continuity.amplitudes": [0.0, 0.0125, 0.025, 0.05, 0.1, 0.2],
    "continuity.direction_seed": 1,
    "gap.seeds": [0, 1, 2],
    "gap.amplitudes": [0.0, 0.05, 0.1],
    "gap.grad_tols": [1e-4, 1e-6],
    "output.dir": "results",
    "output.snapshots": False,
    "check.seeds": [0],
    "check.inject_corruption": 0.0,
    "check.exact_tol": 1e-10,
    "check.order_min": 0.8,
}


def _section(flat: Dict[str, Any], name: str) -> Dict[str, Any]:
    prefix = name + "."
    return {key[len(prefix):]: value for key, value in flat.items() if key.startswith(prefix)}


@dataclass
class RunConfig:
    """Parsed run configuration; `flat` is the full dotted-key echo."""

    n: int
    group: GroupKind
    seed: int
    amplitude: float
    smoothness: int
    spectral: SpectralConfig
    deform: DeformConfig
    flow: FlowConfig
    cutoff_N: List[float]
    cutoff_R: float
    cutoff_grid_n: int
    continuity_amplitudes: List[float]
    continuity_direction_seed: int
    gap_seeds: List[int]
    gap_amplitudes: List[float]
    gap_grad_tols: List[float]
    output_dir: str
    snapshots: bool
    check_seeds: List[int]
    inject_corruption: float
    exact_tol: float
    order_min: float
    flat: Dict[str, Any] = field(default_factory=dict)

    def to_flat(self) -> Dict[str, Any]:
        return dict(sorted(self.flat.items()))

    @classmethod
    def from_flat(cls, flat: Dict[str, Any]) -> "RunConfig":
        unknown = sorted(set(flat) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}", {"unknown": unknown})
        merged = {**DEFAULTS, **flat}
        try:
            n = int(merged["grid.n"])
            if n < 2:
                raise ConfigError(f"grid.n must be >= 2, got {n}")
            amplitude = float(merged["field.amplitude"])
            if amplitude < 0:
                raise ConfigError(f"field.amplitude must be >= 0, got {amplitude}")
            spectral = SpectralConfig(seed=int(merged["field.seed"]), **_section(merged, "spectral"))
            deform = DeformConfig(spectral=spectral, **_section(merged, "deform"))
            flow = FlowConfig(**_section(merged, "flow"))
            return cls(
                n=n,
                group=GroupKind.parse(merged["grid.group"]),
                seed=int(merged["field.seed"]),
                amplitude=amplitude,
                smoothness=int(merged["field.smoothness"]),
                spectral=spectral,
                deform=deform,
                flow=flow,
                cutoff_N=[float(v) for v in merged["cutoff.N"]],
                cutoff_R=float(merged["cutoff.R"]),
                cutoff_grid_n=int(merged["cutoff.grid_n"]),
                continuity_amplitudes=[float(v) for v in merged["continuity.amplitudes"]],
                continuity_direction_seed=int(merged["continuity.direction_seed"]),
                gap_seeds=[int(v) for v in merged["gap.seeds"]],
                gap_amplitudes=[float(v) for v in merged["gap.amplitudes"]],
                gap_grad_tols=[float(v) for v in merged["gap.grad_tols"]],
                output_dir=str(merged["output.dir"]),
                snapshots=bool(merged["output.snapshots"]),
                check_seeds=[int(v) for v in merged["check.seeds"]],
                inject_corruption=float(merged["check.inject_corruption"]),
                exact_tol=float(merged["check.exact_tol"]),
                order_min=float(merged["check.order_min"]),
                flat=merged,
            )
        except ConfigError:
            raise
        except YMKError as e:
            raise ConfigError(e.message, e.details) from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid config value: {e}") from e

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """New config with dotted keys replaced (None values are ignored)."""
        flat = dict(self.flat)
        flat.update({key: value for key, value in overrides.items() if value is not None})
        return RunConfig.from_flat(flat)


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Loads a flat dotted-key JSON file over the defaults.

    A missing or unreadable file raises ConfigError.
    """
    path = path or CONFIG_PATH
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        logger.error(f"Config file not found: {path}")
        raise ConfigError(f"Config file not found: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Failed to load config {path}: {e}")
        raise ConfigError(f"Failed to load config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Config {path} must hold a JSON object of dotted keys")
    raw.update({key: value for key, value in (overrides or {}).items() if value is not None})
    config = RunConfig.from_flat(raw)
    logger.info(f"Loaded config {path} (n={config.n}, group={config.group.name}, seed={config.seed})")
    return config
