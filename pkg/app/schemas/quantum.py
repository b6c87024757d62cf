from typing import Any, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.core.errors import InputValidationError


def readonly(array: np.ndarray) -> np.ndarray:
    """Freeze a numpy array so immutable models cannot be mutated through it"""
    array.setflags(write=False)
    return array


class QuantumState(BaseModel):
    """Unit-norm pure state over a finite-dimensional Hilbert space"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    amplitudes: np.ndarray = Field(
        ...,
        description="Complex amplitudes in the computational basis"
    )

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _validate_amplitudes(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("amplitudes must be a non-empty vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("amplitudes must be finite")
        deviation = abs(float(np.linalg.norm(arr)) - 1.0)
        if deviation > settings.NORM_TOL:
            raise ValueError(f"state norm deviates from 1 by {deviation:.3e}")
        return readonly(arr)

    @classmethod
    def from_vector(cls, vector: Sequence[complex], normalize: bool = True) -> "QuantumState":
        arr = np.array(vector, dtype=complex).reshape(-1)
        if normalize:
            norm = float(np.linalg.norm(arr))
            if norm == 0.0 or not np.isfinite(norm):
                raise InputValidationError("Cannot normalize a zero or non-finite vector")
            arr = arr / norm
        return cls(amplitudes=arr)

    @classmethod
    def basis(cls, dim: int, index: int) -> "QuantumState":
        if not 0 <= index < dim:
            raise InputValidationError(f"Basis index {index} outside [0, {dim})")
        arr = np.zeros(dim, dtype=complex)
        arr[index] = 1.0
        return cls(amplitudes=arr)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    def inner(self, other: "QuantumState") -> complex:
        """⟨self|other⟩"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


class EigenSystem(BaseModel):
    """Spectral decomposition of a Hermitian matrix; eigenvectors stored as columns"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: np.ndarray = Field(..., description="Real eigenvalues (angular frequency)")
    eigenvectors: np.ndarray = Field(..., description="Orthonormal eigenvectors as matrix columns")

    @field_validator("eigenvalues", mode="before")
    @classmethod
    def _validate_eigenvalues(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("eigenvalues must be a finite real vector")
        return readonly(arr)

    @field_validator("eigenvectors", mode="before")
    @classmethod
    def _validate_eigenvectors(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("eigenvectors must form a square matrix")
        gram = arr.conj().T @ arr
        error = float(np.max(np.abs(gram - np.eye(arr.shape[0]))))
        if error > settings.EIGEN_TOL:
            raise ValueError(f"eigenvectors are not orthonormal (max Gram error {error:.3e})")
        return readonly(arr)

    @model_validator(mode="after")
    def _check_shapes(self) -> "EigenSystem":
        if self.eigenvalues.size != self.eigenvectors.shape[0]:
            raise ValueError("eigenvalue count does not match eigenvector dimension")
        return self

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.size)

    def state(self, k: int) -> QuantumState:
        return QuantumState(amplitudes=self.eigenvectors[:, k])

    def reconstruct(self) -> np.ndarray:
        """Σ λ_k v_k v_k†"""
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def residual(self, hamiltonian: np.ndarray) -> float:
        """max |H v_k − λ_k v_k|"""
        h = np.asarray(hamiltonian, dtype=complex)
        return float(np.max(np.abs(h @ self.eigenvectors - self.eigenvectors * self.eigenvalues)))


class Povm(BaseModel):
    """Positive operator-valued measure; elements stacked along the first axis"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    elements: np.ndarray = Field(..., description="Stack of PSD matrices summing to identity")
    label: str = Field("custom", description="Identifier recorded with measurement rounds")
    note: Optional[str] = Field(None, description="Diagnostic attached when the construction was reduced")

    @field_validator("elements", mode="before")
    @classmethod
    def _validate_elements(cls, value: Any) -> np.ndarray:
        arr = np.array([np.asarray(e, dtype=complex) for e in value], dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[0] == 0:
            raise ValueError("POVM elements must be a non-empty list of square matrices")
        if not np.all(np.isfinite(arr)):
            raise ValueError("POVM elements must be finite")
        tol = settings.POVM_TOL
        for idx, element in enumerate(arr):
            if np.max(np.abs(element - element.conj().T)) > tol:
                raise ValueError(f"POVM element {idx} is not Hermitian")
            lowest = float(np.linalg.eigvalsh((element + element.conj().T) / 2)[0])
            if lowest < -tol:
                raise ValueError(f"POVM element {idx} has negative eigenvalue {lowest:.3e}")
        total_error = float(np.max(np.abs(arr.sum(axis=0) - np.eye(arr.shape[1]))))
        if total_error > tol:
            raise ValueError(f"POVM elements do not sum to identity (max error {total_error:.3e})")
        return readonly(arr)

    @classmethod
    def computational(cls, dim: int) -> "Povm":
        return cls(elements=[np.diag(row) for row in np.eye(dim, dtype=complex)], label="computational")

    @classmethod
    def from_vectors(cls, vectors: List[np.ndarray], label: str = "custom", note: Optional[str] = None) -> "Povm":
        """Projectors onto orthonormal vectors plus the remainder I − ΣΠ"""
        projectors = [np.outer(v, np.conj(v)) for v in vectors]
        dim = projectors[0].shape[0]
        remainder = np.eye(dim, dtype=complex) - np.sum(projectors, axis=0)
        remainder = (remainder + remainder.conj().T) / 2
        return cls(elements=projectors + [remainder], label=label, note=note)

    @property
    def size(self) -> int:
        return int(self.elements.shape[0])

    @property
    def dim(self) -> int:
        return int(self.elements.shape[1])

    def probabilities(self, amplitudes: np.ndarray) -> np.ndarray:
        """Born probabilities p_x = ⟨ψ|M_x|ψ⟩"""
        psi = np.asarray(amplitudes, dtype=complex)
        return np.einsum("i,xij,j->x", psi.conj(), self.elements, psi).real

    def is_zero(self, index: int) -> bool:
        return bool(np.max(np.abs(self.elements[index])) <= settings.POVM_TOL)

    def rank_one_vector(self, index: int) -> Optional[np.ndarray]:
        """γ with M_index = |γ⟩⟨γ| when the element is a rank-1 projector, else None"""
        weights, vectors = np.linalg.eigh(self.elements[index])
        tol = 1e3 * settings.POVM_TOL
        if abs(weights[-1] - 1.0) <= tol and np.all(np.abs(weights[:-1]) <= tol):
            return vectors[:, -1]
        return None
