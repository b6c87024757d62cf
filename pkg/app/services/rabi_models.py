"""
Hamiltonians of resonantly driven three-level (Λ/ladder) and (l+1)-level star
systems under the rotating-wave approximation, their analytic eigensystems and
the Jacobian of the (ϑ, Ω₊) parameterization.

Negative Rabi frequencies are accepted everywhere. Outcome statistics with a
computational-basis probe are invariant under Ωᵢ → −Ωᵢ, so estimators only
determine the frequencies up to sign.
"""
import logging
import math
from typing import Sequence

import numpy as np

from app.core.errors import DegenerateSpectrumError, InputValidationError, SingularParameterizationError
from app.schemas.quantum import EigenSystem, QuantumState
from app.schemas.rabi import ParameterJacobian

logger = logging.getLogger(__name__)

SQRT_HALF = 1.0 / math.sqrt(2.0)


def three_level_hamiltonian(omega1: float, omega2: float) -> np.ndarray:
    """½[[0, Ω₁, 0], [Ω₁, 0, Ω₂], [0, Ω₂, 0]]"""
    return 0.5 * np.array(
        [[0.0, omega1, 0.0], [omega1, 0.0, omega2], [0.0, omega2, 0.0]],
        dtype=complex,
    )


def mixing_angle(omega1: float, omega2: float) -> float:
    return math.atan2(omega1, omega2)


def mixing_basis(theta: float) -> np.ndarray:
    """Columns |Φ₀⟩, |Φ₊⟩, |Φ₋⟩ for mixing angle ϑ"""
    s, c = math.sin(theta), math.cos(theta)
    return np.array(
        [
            [c, s * SQRT_HALF, s * SQRT_HALF],
            [0.0, SQRT_HALF, -SQRT_HALF],
            [-s, c * SQRT_HALF, c * SQRT_HALF],
        ],
        dtype=complex,
    )


def three_level_eigensystem(omega1: float, omega2: float) -> EigenSystem:
    """
    Analytic eigenpairs, ordered by ascending eigenvalue: (−Ω₊, Φ₋), (0, Φ₀), (Ω₊, Φ₊)

    Args:
        omega1: Coupling of levels |0⟩ and |1⟩
        omega2: Coupling of levels |1⟩ and |2⟩

    Returns:
        EigenSystem of three_level_hamiltonian(omega1, omega2)
    """
    if omega1 == 0 and omega2 == 0:
        raise DegenerateSpectrumError("Ω₁ = Ω₂ = 0: the mixing angle is undefined")
    omega_plus = 0.5 * math.hypot(omega1, omega2)
    basis = mixing_basis(mixing_angle(omega1, omega2))
    return EigenSystem(
        eigenvalues=[-omega_plus, 0.0, omega_plus],
        eigenvectors=basis[:, [2, 0, 1]],
    )


def star_hamiltonian(omegas: Sequence[float]) -> np.ndarray:
    """H = Σ Ωᵢ (|0⟩⟨i| + |i⟩⟨0|)/2 on l+1 levels"""
    values = np.asarray(omegas, dtype=float).reshape(-1)
    if values.size < 1:
        raise InputValidationError("The star model needs at least one coupling")
    h = np.zeros((values.size + 1, values.size + 1), dtype=complex)
    h[0, 1:] = 0.5 * values
    h[1:, 0] = 0.5 * values
    return h


def parameter_jacobian(omega1: float, omega2: float) -> ParameterJacobian:
    """∂ᵢϑ and ∂ᵢΩ₊; the identities it must satisfy are checked on construction"""
    omega_plus = 0.5 * math.hypot(omega1, omega2)
    if omega_plus == 0:
        raise SingularParameterizationError("Ω₊ = 0: the (ϑ, Ω₊) parameterization is singular")
    four_sq = 4.0 * omega_plus * omega_plus
    jacobian = ParameterJacobian(
        d_theta=(omega2 / four_sq, -omega1 / four_sq),
        d_omega_plus=(omega1 / (4.0 * omega_plus), omega2 / (4.0 * omega_plus)),
        omega_plus=omega_plus,
    )
    jacobian.check_identities()
    return jacobian


class RabiModel:
    """
    A Hamiltonian linear in the Rabi frequencies, H(Ω) = Σ Ωᵢ Eᵢ.

    The probe used by the controlled scheme is the level every coupling touches.
    """

    name = "abstract"
    center_level = 0

    def __init__(self, levels: int):
        if levels < 1:
            raise InputValidationError(f"At least one coupling is required, got {levels}")
        self.levels = levels
        self._generators = self._build_generators()
        self._generators.setflags(write=False)

    def _build_generators(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self.levels + 1

    @property
    def key(self) -> tuple:
        return (self.name, self.levels)

    def generators(self) -> np.ndarray:
        """Constant ∂H/∂Ωᵢ stacked as (l, d, d)"""
        return self._generators

    def hamiltonian(self, omegas: Sequence[float]) -> np.ndarray:
        values = self._check(omegas)
        return np.tensordot(values, self._generators, axes=1)

    def hamiltonian_batch(self, omegas: np.ndarray) -> np.ndarray:
        """H for each row of a (G, l) array of candidates"""
        values = np.asarray(omegas, dtype=float).reshape(-1, self.levels)
        return np.einsum("gi,ijk->gjk", values, self._generators)

    def reduced_hamiltonian(self, index: int) -> np.ndarray:
        """Single-coupling generator driving only Ω_index, used by separate estimation"""
        if not 0 <= index < self.levels:
            raise InputValidationError(f"Coupling index {index} outside [0, {self.levels})")
        return np.array(self._generators[index])

    def probe(self) -> QuantumState:
        return QuantumState.basis(self.dim, self.center_level)

    def _check(self, omegas: Sequence[float]) -> np.ndarray:
        values = np.asarray(omegas, dtype=float).reshape(-1)
        if values.size != self.levels:
            raise InputValidationError(f"{self.name} model expects {self.levels} frequencies, got {values.size}")
        return values

    def __repr__(self) -> str:
        return f"{type(self).__name__}(levels={self.levels})"


class LambdaModel(RabiModel):
    """Three-level Λ (or ladder) system; both fields couple through level |1⟩"""

    name = "lambda"
    center_level = 1

    def __init__(self, levels: int = 2):
        if levels != 2:
            raise InputValidationError("The Λ model has exactly two couplings")
        super().__init__(levels)

    def _build_generators(self) -> np.ndarray:
        return np.stack([three_level_hamiltonian(1.0, 0.0), three_level_hamiltonian(0.0, 1.0)])

    def hamiltonian(self, omegas: Sequence[float]) -> np.ndarray:
        omega1, omega2 = self._check(omegas)
        return three_level_hamiltonian(omega1, omega2)


class StarModel(RabiModel):
    """Level |0⟩ coupled to each of |1⟩..|l⟩"""

    name = "star"
    center_level = 0

    def _build_generators(self) -> np.ndarray:
        return np.stack([star_hamiltonian(np.eye(self.levels)[i]) for i in range(self.levels)])

    def hamiltonian(self, omegas: Sequence[float]) -> np.ndarray:
        return star_hamiltonian(self._check(omegas))


def model_for(name: str, levels: int) -> RabiModel:
    if name == "lambda":
        return LambdaModel(levels)
    if name == "star":
        return StarModel(levels)
    raise InputValidationError(f"Unknown model {name!r}; expected 'lambda' or 'star'")


def default_model(levels: int) -> RabiModel:
    """Λ system for two frequencies, star graph otherwise"""
    return LambdaModel() if levels == 2 else StarModel(levels)
