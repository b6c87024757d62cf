"""
Flat `key = value` configuration files for `adapt`.

    # two-frequency run
    omega1_true = 0.3
    omega2_true = 0.7
    time = 5
    rounds = 15
    initial_guess_1 = 0.63
    initial_guess_2 = 0.39

Accepted keys: omega<i>_true, initial_guess_<i>, time, shots_per_round, rounds,
seed, box_lo, box_hi, trust_radius, grid_points, segments, model. `#` starts a
comment.
"""
import logging
import re
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.adaptive import AdaptiveConfig

logger = logging.getLogger(__name__)

INDEXED_KEY = re.compile(r"^(omega(\d+)_true|initial_guess_(\d+))$")
INT_KEYS = ("shots_per_round", "rounds", "seed", "grid_points", "segments")
FLOAT_KEYS = ("time", "box_lo", "box_hi", "trust_radius")
TEXT_KEYS = ("model",)


def _convert(key: str, raw: str, line_no: int) -> Any:
    try:
        if key in INT_KEYS:
            return int(raw, 0)
        if key in TEXT_KEYS:
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} = {raw!r} is not a valid number")


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse key = value lines into typed values

    Args:
        text: File contents

    Returns:
        Mapping of key to int, float or str
    """
    values: Dict[str, Any] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"line {line_no}: expected `key = value`, got {content!r}")
        key, raw = (part.strip() for part in content.split("=", 1))
        if not (INDEXED_KEY.match(key) or key in INT_KEYS + FLOAT_KEYS + TEXT_KEYS):
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {line_no}: {key} has no value")
        values[key] = _convert(key, raw, line_no)
    return values


def _indexed(values: Dict[str, Any], prefix: str, suffix: str, required: bool) -> Optional[Tuple[float, ...]]:
    """Collect prefix<i>suffix values for i = 1..l"""
    pattern = re.compile(rf"^{prefix}(\d+){suffix}$")
    indices = sorted(int(m.group(1)) for m in (pattern.match(k) for k in values) if m)
    if not indices:
        if required:
            raise ConfigError(f"no {prefix}<i>{suffix} keys found")
        return None
    if indices != list(range(1, len(indices) + 1)):
        raise ConfigError(f"{prefix}<i>{suffix} indices {indices} must run 1..l without gaps")
    return tuple(values[f"{prefix}{i}{suffix}"] for i in indices)


def build_adaptive_config(values: Dict[str, Any], seed_flag: Optional[int] = None) -> AdaptiveConfig:
    """Turn parsed values into an AdaptiveConfig, applying seed precedence"""
    omega_true = _indexed(values, "omega", "_true", required=True)
    guess = _indexed(values, "initial_guess_", "", required=False)
    for key in ("time", "rounds"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    lo = values.get("box_lo", settings.DEFAULT_BOX[0])
    hi = values.get("box_hi", settings.DEFAULT_BOX[1])
    data = {
        "model": values.get("model", "lambda" if len(omega_true) == 2 else "star"),
        "omega_true": omega_true,
        "t": values["time"],
        "segments": values.get("segments", settings.DEFAULT_SEGMENTS),
        "shots_per_round": values.get("shots_per_round", settings.DEFAULT_SHOTS_PER_ROUND),
        "rounds": values["rounds"],
        "initial_guess": guess,
        "search_box": (lo, hi),
        "trust_radius": values.get("trust_radius"),
        "grid_points": values.get("grid_points", settings.DEFAULT_GRID_POINTS),
        "seed": settings.resolve_seed(seed_flag, values.get("seed")),
    }
    try:
        return AdaptiveConfig(**data)
    except ValidationError as e:
        messages = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid configuration: {messages}")


def load_adaptive_config(path: str, seed_flag: Optional[int] = None) -> AdaptiveConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    config = build_adaptive_config(parse_config_text(text), seed_flag=seed_flag)
    logger.info(f"Loaded adaptive configuration from {path}: seed {config.seed}")
    return config
