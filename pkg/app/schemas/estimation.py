import logging
import math
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.core.errors import InputValidationError, SingularQfimError
from app.schemas.quantum import QuantumState, readonly
from app.schemas.rabi import RabiParameters

logger = logging.getLogger(__name__)

BUDGET_CONVENTION = (
    "separate estimation runs m experiments per parameter; "
    "joint estimation runs l*m experiments in total (2m for two frequencies)"
)


class StateDerivatives(BaseModel):
    """Output state |ψ_Ω⟩ with its unnormalized partials |∂ᵢψ_Ω⟩"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    base: QuantumState
    partials: np.ndarray = Field(..., description="Row i holds |∂ᵢψ⟩")
    method: Literal["analytic", "finite-difference", "spectral"]

    @field_validator("partials", mode="before")
    @classmethod
    def _validate_partials(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=complex)
        if arr.ndim != 2 or not np.all(np.isfinite(arr)):
            raise ValueError("partials must be a finite (p, dim) array")
        return readonly(arr)

    @model_validator(mode="after")
    def _check_norm_preservation(self) -> "StateDerivatives":
        if self.partials.shape[1] != self.base.dim:
            raise ValueError("partials do not match the state dimension")
        overlaps = self.partials.conj() @ self.base.amplitudes
        for idx, value in enumerate(overlaps):
            tol = settings.DERIVATIVE_NORM_TOL * max(1.0, float(np.linalg.norm(self.partials[idx])))
            if abs(value.real) <= tol:
                continue
            # finite differences carry an O(h²t³) real part
            if self.method == "finite-difference":
                logger.warning(f"Finite-difference Re⟨ψ|∂{idx + 1}ψ⟩ = {value.real:.3e} exceeds {tol:.1e}")
            else:
                raise ValueError(f"Re⟨ψ|∂{idx + 1}ψ⟩ = {value.real:.3e} breaks norm preservation")
        return self

    @property
    def count(self) -> int:
        return int(self.partials.shape[0])

    def gram(self) -> np.ndarray:
        """G_ij = ⟨∂ᵢψ|∂ⱼψ⟩"""
        return self.partials.conj() @ self.partials.T

    def overlaps(self) -> np.ndarray:
        """v_i = ⟨∂ᵢψ|ψ⟩"""
        return self.partials.conj() @ self.base.amplitudes


class QfimResult(BaseModel):
    """Quantum Fisher information matrix with saturability diagnostics"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    commutation_residuals: np.ndarray = Field(..., description="Im⟨∂ᵢψ|∂ⱼψ⟩")
    singular: bool
    condition_number: float
    method: str = "analytic"

    @field_validator("matrix", "commutation_residuals", mode="before")
    @classmethod
    def _validate_square(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("expected a square matrix")
        return readonly(arr)

    @model_validator(mode="after")
    def _check_invariants(self) -> "QfimResult":
        scale = max(1.0, float(np.max(np.abs(self.matrix))) if self.matrix.size else 1.0)
        if np.max(np.abs(self.matrix - self.matrix.T)) > 1e-10 * scale:
            raise ValueError("QFIM is not symmetric")
        trace = float(np.trace(self.matrix))
        lowest = float(np.linalg.eigvalsh(self.matrix)[0])
        if lowest < -1e-9 * abs(trace) - 1e-14:
            raise ValueError(f"QFIM has negative eigenvalue {lowest:.3e}")
        return self

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self) -> np.ndarray:
        if self.singular:
            raise SingularQfimError(
                f"QFIM is singular (condition number {self.condition_number:.3e}), cannot invert"
            )
        return np.linalg.inv(self.matrix)

    def trace_inverse(self) -> float:
        return float(np.trace(self.inverse()))

    def max_residual(self) -> float:
        if self.size < 2:
            return 0.0
        return float(np.max(np.abs(self.commutation_residuals[np.triu_indices(self.size, k=1)])))

    def max_off_diagonal(self) -> float:
        if self.size < 2:
            return 0.0
        return float(np.max(np.abs(self.matrix - np.diag(np.diag(self.matrix)))))


class ProbeCoefficients(BaseModel):
    """Probe amplitudes (C₀, C₊, C₋) in the eigenbasis (Φ₀, Φ₊, Φ₋), with C₀ real"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    c0: float
    c_plus: complex
    c_minus: complex

    @field_validator("c_plus", "c_minus", mode="before")
    @classmethod
    def _to_complex(cls, value: Any) -> complex:
        return complex(value)

    @model_validator(mode="after")
    def _check_normalization(self) -> "ProbeCoefficients":
        total = self.c0 ** 2 + abs(self.c_plus) ** 2 + abs(self.c_minus) ** 2
        if abs(total - 1.0) > settings.NORM_TOL:
            raise ValueError(f"probe coefficients are not normalized (Σ|C|² = {total!r})")
        return self

    @classmethod
    def normalized(cls, c0: complex, c_plus: complex, c_minus: complex) -> "ProbeCoefficients":
        """Normalize and rotate the global phase so that C₀ is real and non-negative"""
        vec = np.array([c0, c_plus, c_minus], dtype=complex)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise InputValidationError("Probe coefficients cannot all vanish")
        vec = vec / norm
        if abs(vec[0]) > 0.0:
            vec = vec * (np.conj(vec[0]) / abs(vec[0]))
        return cls(c0=float(vec[0].real), c_plus=vec[1], c_minus=vec[2])

    @classmethod
    def from_state(cls, state: QuantumState, omega: RabiParameters) -> "ProbeCoefficients":
        from app.services.rabi_models import mixing_basis

        coefficients = mixing_basis(omega.theta).conj().T @ state.amplitudes
        return cls.normalized(*coefficients)

    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c_plus, self.c_minus], dtype=complex)

    def to_state(self, omega: RabiParameters) -> QuantumState:
        from app.services.rabi_models import mixing_basis

        return QuantumState.from_vector(mixing_basis(omega.theta) @ self.vector())


class ClosedFormCoefficients(BaseModel):
    """P, M, N and the A, B, C entries of the (ϑ, Ω₊) information matrix"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    p: complex
    m: complex
    n: complex
    c0: float
    t: float
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None

    @field_validator("p", "m", "n", mode="before")
    @classmethod
    def _to_complex(cls, value: Any) -> complex:
        return complex(value)

    @model_validator(mode="after")
    def _check_identities(self) -> "ClosedFormCoefficients":
        p_sq = abs(self.p) ** 2
        expected = 2 * p_sq * (1 - self.c0 ** 2)
        if abs(abs(self.m) ** 2 + abs(self.n) ** 2 - expected) > 1e-12 * max(1.0, 2 * p_sq):
            raise ValueError("|M|² + |N|² = 2|P|²(1 − C₀²) does not hold")
        if self.a is not None and self.b is not None and self.c is not None:
            a_scale = max(1.0, 4 * p_sq)
            b_scale = max(1.0, 4 * self.t ** 2)
            if self.a < -1e-12 * a_scale or 4 * p_sq - self.a < -1e-12 * a_scale:
                raise ValueError(f"A = {self.a!r} outside [0, 4|P|²]")
            if 4 * self.t ** 2 - self.b < -1e-12 * b_scale:
                raise ValueError(f"B = {self.b!r} exceeds 4t²")
            if self.a * self.b - self.c ** 2 < -1e-9 * a_scale * b_scale:
                raise ValueError("AB − C² is negative")
        return self

    @property
    def has_abc(self) -> bool:
        return self.a is not None


class BoundReport(BaseModel):
    """Total-variance lower bounds under the shared experiment budget"""

    model_config = ConfigDict(frozen=True)

    joint: float = Field(..., gt=0, description="Joint-estimation bound (may be inf at singular times)")
    separate: float = Field(..., gt=0)
    controlled: float = Field(..., gt=0)
    regime: Literal["joint-wins", "separate-wins", "tie"]
    m: int = Field(..., ge=1)
    t: float = Field(..., gt=0)
    levels: int = Field(2, ge=1)
    omega_plus: Optional[float] = None
    convention: str = BUDGET_CONVENTION

    @property
    def ratio(self) -> float:
        """separate / joint"""
        return self.separate / self.joint

    @property
    def per_parameter(self) -> float:
        return self.controlled / self.levels


class ProbeSearchResult(BaseModel):
    """Outcome of a random search for probes beating the closed-form minimum"""

    model_config = ConfigDict(frozen=True)

    samples: int
    best_trace_inverse: float
    min_trace_inverse: float
    violations: int = Field(..., description="Probes undercutting the minimum by more than the tolerance")

    @property
    def slack(self) -> float:
        return self.best_trace_inverse - self.min_trace_inverse

    @property
    def relative_slack(self) -> float:
        return self.slack / self.min_trace_inverse if math.isfinite(self.min_trace_inverse) else math.nan
