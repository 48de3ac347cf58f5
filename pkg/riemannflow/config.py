"""Run configuration shared by the command line and JSON config files."""
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .constants import DEFAULT_BISECTION_TOL, EPSILON_TOKENS, HALF_PI
from .errors import ConfigError
from .integrator import IntegratorConfig
from .surface import SurfacePoint

INTEGRATOR_FIELDS = tuple(f.name for f in dataclasses.fields(IntegratorConfig))


def parse_epsilon(value: Union[str, float, int]) -> float:
    """Epsilon from a number, a decimal string, or one of the tokens ``1/pi`` and ``1+sqrt2``."""
    if isinstance(value, bool):
        raise ConfigError(f"epsilon must be a number, got {value!r}")
    if isinstance(value, (int, float)):
        result = float(value)
    else:
        text = value.strip().lower()
        if text in EPSILON_TOKENS:
            return EPSILON_TOKENS[text]
        try:
            result = float(text)
        except ValueError:
            raise ConfigError(f"epsilon must be a decimal or one of {', '.join(EPSILON_TOKENS)}; got {value!r}")
    if not math.isfinite(result):
        raise ConfigError(f"epsilon must be finite, got {value!r}")
    return result


def parse_grid(value: Union[str, list, tuple]) -> Tuple[float, ...]:
    """An epsilon grid from ``start:stop:count`` (inclusive ends) or a comma-separated list.

    Args:
        value: Grid text or a list of numbers and tokens

    Returns:
        The grid values in the order given
    """
    if isinstance(value, (list, tuple)):
        return tuple(parse_epsilon(v) for v in value)
    text = value.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid ranges look like start:stop:count, got {value!r}")
        start, stop = parse_epsilon(parts[0]), parse_epsilon(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise ConfigError(f"grid count must be an integer, got {parts[2]!r}")
        if count < 1:
            raise ConfigError(f"grid count must be at least 1, got {count}")
        if count == 1:
            return (start,)
        step = (stop - start) / (count - 1)
        return tuple(start + i * step for i in range(count))
    return tuple(parse_epsilon(part) for part in text.split(",") if part.strip())


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs; unset integrator fields fall back to IntegratorConfig defaults."""

    # Deformation parameter
    epsilon: float = 0.0

    # Launch at -i*y0 on the principal sheet
    y0: Optional[float] = None

    # Launch at re + i*im, lifted next to the negative-imaginary axis
    re: Optional[float] = None
    im: Optional[float] = None

    # Integrator overrides
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    energy_tol: Optional[float] = None
    max_time: Optional[float] = None
    escape_radius: Optional[float] = None
    closure_tol: Optional[float] = None
    turning_tol: Optional[float] = None
    max_step_angle: Optional[float] = None
    max_steps: Optional[int] = None

    # Signed run length for the trajectory command
    duration: Optional[float] = None

    # Pair index n, or sheet depth for critical searches
    n: int = 0
    side: str = "right"

    # Search brackets
    y_lo: Optional[float] = None
    y_hi: Optional[float] = None
    tol: float = DEFAULT_BISECTION_TOL
    eps_lo: Optional[float] = None
    eps_hi: Optional[float] = None

    # Sweeps
    eps_grid: Optional[Tuple[float, ...]] = None
    n_max: int = 8
    workers: Optional[int] = None

    def __post_init__(self):
        if (self.re is None) != (self.im is None):
            raise ConfigError("re and im must be given together")
        if self.y0 is not None and self.re is not None:
            raise ConfigError("give either y0 or re/im, not both")
        if self.y0 is not None and not self.y0 > 0:
            raise ConfigError(f"y0 must be positive, got {self.y0}")
        if self.side not in ("left", "right"):
            raise ConfigError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.n < 0:
            raise ConfigError(f"n must be >= 0, got {self.n}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        # Validates the overrides early
        self.integrator_config()

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> 'RunConfig':
        """Build from a mapping whose keys must be RunConfig field names."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        cleaned = dict(values)
        if "epsilon" in cleaned and cleaned["epsilon"] is not None:
            cleaned["epsilon"] = parse_epsilon(cleaned["epsilon"])
        for key in ("eps_lo", "eps_hi"):
            if cleaned.get(key) is not None:
                cleaned[key] = parse_epsilon(cleaned[key])
        if cleaned.get("eps_grid") is not None:
            cleaned["eps_grid"] = parse_grid(cleaned["eps_grid"])
        try:
            return cls(**cleaned)
        except TypeError as exc:
            raise ConfigError(str(exc))

    def merged(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        """Copy with every non-None override applied on top."""
        values = dataclasses.asdict(self)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_mapping(values)

    def integrator_config(self) -> IntegratorConfig:
        overrides = {name: getattr(self, name) for name in INTEGRATOR_FIELDS if getattr(self, name) is not None}
        return IntegratorConfig().replace(**overrides)

    def initial_point(self) -> SurfacePoint:
        """The launch point; defaults to -i when nothing was given."""
        if self.re is not None:
            return SurfacePoint.from_complex(complex(self.re, self.im), -HALF_PI)
        return SurfacePoint(self.y0 if self.y0 is not None else 1.0, -HALF_PI)


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON config file and check its keys against RunConfig.

    Returns:
        The raw key/value mapping, ready for RunConfig.from_mapping or merged
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            values = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(values, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    RunConfig.from_mapping(values)
    return values
