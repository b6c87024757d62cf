from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Numeric flags shared by several commands and their lower limits
POSITIVE_FLAGS = ("time", "omega_plus", "xmax")
AT_LEAST_ONE_FLAGS = ("m", "shots", "steps", "levels", "workers")
NON_NEGATIVE_FLAGS = ("offset_max",)


class RunConfig(BaseModel):
    """A parsed command invocation"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Literal["qfim", "compare", "robustness", "adapt", "multilevel", "verify", "bounds"]
    flags: Dict[str, Any] = Field(default_factory=dict)
    config_path: Optional[str] = None
    output: Optional[str] = None
    output_format: Literal["csv", "parquet"] = "csv"
    seed: Optional[Any] = Field(None, description="Explicit seed flag, range-checked by RngStream")

    @model_validator(mode="after")
    def _check_numeric_flags(self) -> "RunConfig":
        for name, value in self.flags.items():
            if value is None:
                continue
            if name in POSITIVE_FLAGS and not value > 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive, got {value}")
            if name in AT_LEAST_ONE_FLAGS and not value >= 1:
                raise ValueError(f"--{name.replace('_', '-')} must be at least 1, got {value}")
            if name in NON_NEGATIVE_FLAGS and not value >= 0:
                raise ValueError(f"--{name.replace('_', '-')} must be non-negative, got {value}")
        if self.output_format == "parquet" and self.output is None:
            raise ValueError("--format parquet needs --output")
        return self


class SuiteResult(BaseModel):
    """Outcome of one verification suite"""

    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    max_error: float = Field(..., description="Largest observed deviation, in the suite's own units")
    checks: int = Field(0, ge=0)
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name} max_error={self.max_error:.3e} checks={self.checks}"
        return f"{text} {self.detail}" if self.detail else text
