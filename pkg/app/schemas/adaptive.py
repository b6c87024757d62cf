import math
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings

SEED_LIMIT = 2 ** 64


class AdaptiveConfig(BaseModel):
    """Parameters of one adaptive-control estimation trajectory"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: Literal["lambda", "star"] = Field("lambda", description="Three-level Λ system or (l+1)-level star")
    omega_true: Tuple[float, ...] = Field(..., description="True Rabi frequencies")
    t: float = Field(..., gt=0, description="Evolution time per round")
    segments: int = Field(settings.DEFAULT_SEGMENTS, ge=1, description="Control segments N")
    shots_per_round: int = Field(settings.DEFAULT_SHOTS_PER_ROUND, ge=1, description="Measurements k per round")
    rounds: int = Field(..., ge=0)
    initial_guess: Tuple[float, ...]
    search_box: Tuple[Tuple[float, float], ...] = Field(..., description="Per-parameter [lo, hi]")
    trust_radius: Optional[float] = Field(
        None, gt=0, description="Estimates stay within this distance of initial_guess; TRUST_RADIUS_FRACTION·2π/t by default"
    )
    grid_points: int = Field(settings.DEFAULT_GRID_POINTS, ge=1, description="Coarse grid points per axis")
    seed: int = Field(settings.DEFAULT_SEED, description="Seed in [0, 2**64)")

    @model_validator(mode="before")
    @classmethod
    def _broadcast_box(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        count = len(data.get("omega_true") or ())
        box = data.get("search_box", settings.DEFAULT_BOX)
        if len(box) == 2 and all(isinstance(v, (int, float)) for v in box):
            data["search_box"] = tuple((float(box[0]), float(box[1])) for _ in range(count))
        if data.get("initial_guess") is None and count:
            data["initial_guess"] = (0.0,) * count
        return data

    @field_validator("seed", mode="plain")
    @classmethod
    def _check_seed(cls, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < SEED_LIMIT:
            raise ValueError(f"seed must be an integer in [0, 2**64), got {value!r}")
        return value

    @field_validator("omega_true", "initial_guess", mode="before")
    @classmethod
    def _floats(cls, value: Any) -> Tuple[float, ...]:
        return tuple(float(v) for v in value)

    @model_validator(mode="after")
    def _check_consistency(self) -> "AdaptiveConfig":
        count = len(self.omega_true)
        if count == 0:
            raise ValueError("omega_true needs at least one frequency")
        if self.model == "lambda" and count != 2:
            raise ValueError("the Λ model estimates exactly two frequencies")
        if len(self.initial_guess) != count or len(self.search_box) != count:
            raise ValueError("initial_guess and search_box must match omega_true in length")
        for idx, ((lo, hi), guess) in enumerate(zip(self.search_box, self.initial_guess)):
            if not lo < hi:
                raise ValueError(f"search box axis {idx + 1} is empty: [{lo}, {hi}]")
            if not lo <= guess <= hi:
                raise ValueError(f"initial guess {guess} outside search box axis {idx + 1}")
        return self

    @property
    def levels(self) -> int:
        return len(self.omega_true)

    @property
    def dt(self) -> float:
        return self.t / self.segments

    @property
    def trust_region_radius(self) -> float:
        if self.trust_radius is not None:
            return self.trust_radius
        return settings.TRUST_RADIUS_FRACTION * 2.0 * math.pi / self.t

    def in_trust_region(self, point: Sequence[float]) -> bool:
        offset = math.dist(tuple(float(v) for v in point), self.initial_guess)
        return offset <= self.trust_region_radius


class RoundRecord(BaseModel):
    """Counts collected in one round under the control built from an estimate"""

    model_config = ConfigDict(frozen=True)

    control_estimate: Tuple[float, ...]
    counts: Tuple[int, ...]
    povm_id: str = "computational"
    role: Literal["estimate", "alias-check"] = Field(
        "estimate", description="Control built from the current estimate, or offset to separate an aliased rival"
    )

    @field_validator("counts")
    @classmethod
    def _non_negative(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(c < 0 for c in value):
            raise ValueError("counts must be non-negative")
        return value

    @property
    def shots(self) -> int:
        return sum(self.counts)


class AdaptiveTrace(BaseModel):
    """Per-round history of one adaptive run"""

    model_config = ConfigDict(frozen=True)

    config: AdaptiveConfig
    rounds: List[RoundRecord] = Field(default_factory=list)
    estimates: List[Tuple[float, ...]] = Field(default_factory=list, description="Cumulative MLE after each round")
    norm_inv_variance: List[float] = Field(default_factory=list, description="Fisher-information proxy per step")
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_trace(self) -> "AdaptiveTrace":
        if not len(self.rounds) == len(self.estimates) == len(self.norm_inv_variance):
            raise ValueError("rounds, estimates and variances must have one entry per step")
        for step, estimate in enumerate(self.estimates, start=1):
            for value, (lo, hi) in zip(estimate, self.config.search_box):
                if not lo <= value <= hi:
                    raise ValueError(f"estimate {estimate} at step {step} leaves the search box")
            if not self.config.in_trust_region(estimate):
                raise ValueError(f"estimate {estimate} at step {step} leaves the trust region")
        for record in self.rounds:
            if record.shots != self.config.shots_per_round:
                raise ValueError("every round must hold shots_per_round counts")
        return self

    @property
    def seed(self) -> int:
        return self.config.seed
