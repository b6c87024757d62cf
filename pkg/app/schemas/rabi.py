import math
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings
from app.core.errors import IdentityViolationError, InputValidationError


class RabiParameters(BaseModel):
    """Vector Ω of Rabi frequencies with its derived spectral quantities"""

    model_config = ConfigDict(frozen=True)

    omegas: Tuple[float, ...] = Field(
        ...,
        description="Rabi frequencies Ω₁..Ω_l in angular-frequency units"
    )

    @field_validator("omegas", mode="before")
    @classmethod
    def _validate_omegas(cls, value):
        values = tuple(float(v) for v in np.asarray(value, dtype=float).reshape(-1))
        if not values:
            raise ValueError("at least one Rabi frequency is required")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("Rabi frequencies must be finite")
        return values

    @classmethod
    def of(cls, *omegas: float) -> "RabiParameters":
        return cls(omegas=omegas)

    @property
    def count(self) -> int:
        return len(self.omegas)

    @property
    def omega_plus(self) -> float:
        """Ω₊ = ½√(ΣΩᵢ²)"""
        return 0.5 * math.sqrt(math.fsum(v * v for v in self.omegas))

    @property
    def theta(self) -> float:
        """Mixing angle ϑ = atan2(Ω₁, Ω₂), three-level systems only"""
        if self.count != 2:
            raise InputValidationError(f"Mixing angle needs two couplings, got {self.count}")
        return math.atan2(self.omegas[0], self.omegas[1])

    def as_array(self) -> np.ndarray:
        return np.array(self.omegas, dtype=float)

    def shifted(self, delta: Sequence[float]) -> "RabiParameters":
        return RabiParameters(omegas=self.as_array() + np.asarray(delta, dtype=float))


class ParameterJacobian(BaseModel):
    """Derivatives of (ϑ, Ω₊) with respect to (Ω₁, Ω₂)"""

    model_config = ConfigDict(frozen=True)

    d_theta: Tuple[float, float]
    d_omega_plus: Tuple[float, float]
    omega_plus: float = Field(..., gt=0)

    def matrix(self) -> np.ndarray:
        """G with rows (ϑ, Ω₊) and columns (Ω₁, Ω₂)"""
        return np.array([self.d_theta, self.d_omega_plus], dtype=float)

    def determinant(self) -> float:
        return self.d_theta[0] * self.d_omega_plus[1] - self.d_theta[1] * self.d_omega_plus[0]

    def check_identities(self) -> None:
        """Raise when the Jacobian identities behind the Tr(J⁻¹) simplification fail"""
        tol = settings.IDENTITY_TOL
        op = self.omega_plus
        theta_sq = self.d_theta[0] ** 2 + self.d_theta[1] ** 2
        plus_sq = self.d_omega_plus[0] ** 2 + self.d_omega_plus[1] ** 2
        cross = self.d_theta[0] * self.d_omega_plus[0] + self.d_theta[1] * self.d_omega_plus[1]
        checks = {
            "Σ(∂ϑ)² = 1/(4Ω₊²)": abs(theta_sq * 4 * op * op - 1.0),
            "Σ(∂Ω₊)² = 1/4": abs(plus_sq * 4 - 1.0),
            "Σ∂ϑ∂Ω₊ = 0": abs(cross) / math.sqrt(theta_sq * plus_sq),
            "det G = 1/(4Ω₊)": abs(self.determinant() * 4 * op - 1.0),
        }
        failed = {name: err for name, err in checks.items() if err > tol}
        if failed:
            raise IdentityViolationError(f"Jacobian identities violated at Ω₊={op!r}: {failed}")
