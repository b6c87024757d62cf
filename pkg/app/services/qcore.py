"""
Dense complex linear algebra for small Hilbert spaces: spectral decomposition,
time evolution, Gram–Schmidt and Born-rule sampling.

Units: ħ = 1, so H carries angular frequency and Ht is dimensionless.
"""
import logging
from typing import List, Sequence, Union

import numpy as np

from app.core.config import settings
from app.core.errors import InputValidationError, RankDeficiencyError
from app.schemas.quantum import EigenSystem, Povm, QuantumState
from app.services.rng import RngStream

logger = logging.getLogger(__name__)

StateLike = Union[QuantumState, np.ndarray, Sequence[complex]]


def _amplitudes(state: StateLike) -> np.ndarray:
    if isinstance(state, QuantumState):
        return state.amplitudes
    return np.asarray(state, dtype=complex).reshape(-1)


def check_hermitian(matrix, name: str = "H") -> np.ndarray:
    """
    Validate a square, finite, Hermitian matrix

    Args:
        matrix: Candidate matrix
        name: Label used in error messages

    Returns:
        The matrix as a complex ndarray, symmetrized
    """
    arr = np.asarray(matrix, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise InputValidationError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputValidationError(f"{name} has non-finite entries")
    scale = float(np.max(np.abs(arr)))
    asymmetry = float(np.max(np.abs(arr - arr.conj().T)))
    if asymmetry > settings.HERMITIAN_TOL * scale:
        raise InputValidationError(f"{name} is not Hermitian (max |H − H†| = {asymmetry:.3e})")
    return (arr + arr.conj().T) / 2


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the first significant entry of each column real and positive"""
    fixed = vectors.copy()
    for k in range(fixed.shape[1]):
        column = fixed[:, k]
        lead = column[np.argmax(np.abs(column) > 1e-8)]
        fixed[:, k] = column * (np.conj(lead) / abs(lead))
    return fixed


def hermitian_eig(matrix) -> EigenSystem:
    """Spectral decomposition with ascending eigenvalues and phase-fixed eigenvectors"""
    h = check_hermitian(matrix)
    values, vectors = np.linalg.eigh(h)
    return EigenSystem(eigenvalues=values, eigenvectors=_fix_phases(vectors))


def propagator(matrix, t: float) -> np.ndarray:
    """e^{−iHt} through the spectral decomposition"""
    h = check_hermitian(matrix)
    values, vectors = np.linalg.eigh(h)
    return (vectors * np.exp(-1j * values * t)) @ vectors.conj().T


def propagator_batch(matrices: np.ndarray, t: float) -> np.ndarray:
    """e^{−iHt} for a stack of Hermitian matrices of shape (G, d, d)"""
    stack = np.asarray(matrices, dtype=complex)
    values, vectors = np.linalg.eigh(stack)
    phases = np.exp(-1j * values * t)
    return (vectors * phases[..., None, :]) @ np.conj(np.swapaxes(vectors, -1, -2))


def evolve(matrix, t: float, psi: QuantumState) -> QuantumState:
    """e^{−iHt}|ψ⟩"""
    h = check_hermitian(matrix)
    if t == 0:
        return psi
    values, vectors = np.linalg.eigh(h)
    amplitudes = vectors @ (np.exp(-1j * values * t) * (vectors.conj().T @ psi.amplitudes))
    return QuantumState(amplitudes=amplitudes)


def sample_measurement(psi: QuantumState, povm: Povm, shots: int, rng: RngStream) -> np.ndarray:
    """
    Draw outcome counts for repeated measurements of the same state

    Args:
        psi: Measured state
        povm: Measurement
        shots: Number of repetitions
        rng: Random stream owned by the caller

    Returns:
        Integer counts per POVM outcome, summing to shots
    """
    if shots < 1:
        raise InputValidationError(f"shots must be at least 1, got {shots}")
    if povm.dim != psi.dim:
        raise InputValidationError(f"POVM acts on dimension {povm.dim}, state has {psi.dim}")
    probabilities = povm.probabilities(psi.amplitudes)
    total = float(np.sum(probabilities))
    if abs(total - 1.0) > settings.PROBABILITY_SUM_TOL:
        raise InputValidationError(f"Outcome probabilities sum to {total!r}")
    return rng.multinomial(shots, probabilities)


def orthonormalize(vectors: Sequence[np.ndarray], tol: float = None) -> List[np.ndarray]:
    """
    Modified Gram–Schmidt with one reorthogonalization pass

    Args:
        vectors: Linearly independent complex vectors
        tol: Relative residual below which a vector counts as dependent

    Returns:
        Orthonormal vectors spanning the same space, in order
    """
    tol = settings.ORTHONORMAL_TOL if tol is None else tol
    basis: List[np.ndarray] = []
    for index, vector in enumerate(vectors):
        original = np.asarray(vector, dtype=complex).reshape(-1)
        w = original.copy()
        for _ in range(2):
            for q in basis:
                w = w - np.vdot(q, w) * q
        norm = float(np.linalg.norm(w))
        if norm <= tol * max(1.0, float(np.linalg.norm(original))):
            raise RankDeficiencyError(index)
        basis.append(w / norm)
    return basis


def phase_equivalent(a: StateLike, b: StateLike, tol: float = 1e-10) -> bool:
    """1 − |⟨a|b⟩| < tol"""
    return 1.0 - abs(np.vdot(_amplitudes(a), _amplitudes(b))) < tol


def random_state(dim: int, rng: RngStream) -> QuantumState:
    draws = rng.normal(2 * dim)
    return QuantumState.from_vector(draws[:dim] + 1j * draws[dim:])


def random_hermitian(dim: int, rng: RngStream) -> np.ndarray:
    draws = rng.normal((2, dim, dim))
    m = draws[0] + 1j * draws[1]
    return (m + m.conj().T) / 2
