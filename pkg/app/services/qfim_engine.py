"""
Pure-state estimation machinery: output states, parameter derivatives, SLD
operators, the quantum and classical Fisher information matrices and the weak
commutation test.

Normalization: J_ij = 2(⟨∂ᵢψ|∂ⱼψ⟩ + ⟨∂ⱼψ|∂ᵢψ⟩) + 4⟨∂ᵢψ|ψ⟩⟨∂ⱼψ|ψ⟩, so the optimal
single-parameter probe reaches J = t².
"""
import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np

from app.core.config import settings
from app.core.errors import InputValidationError
from app.schemas.estimation import ProbeCoefficients, QfimResult, StateDerivatives
from app.schemas.quantum import Povm, QuantumState
from app.schemas.rabi import ParameterJacobian, RabiParameters
from app.services import qcore
from app.services.rabi_models import (
    LambdaModel,
    RabiModel,
    default_model,
    mixing_basis,
    parameter_jacobian,
    three_level_eigensystem,
)
from app.services.rng import RngStream

logger = logging.getLogger(__name__)

SQRT_HALF = 1.0 / math.sqrt(2.0)

DerivativeMethod = Literal["auto", "analytic", "finite-difference", "spectral"]


def _resolve_model(omega: RabiParameters, model: Optional[RabiModel]) -> RabiModel:
    model = model or default_model(omega.count)
    if model.levels != omega.count:
        raise InputValidationError(f"{model!r} expects {model.levels} frequencies, got {omega.count}")
    return model


def output_state(
    omega: RabiParameters,
    t: float,
    psi_in: QuantumState,
    model: Optional[RabiModel] = None,
) -> QuantumState:
    """|ψ_Ω⟩ = e^{−iH(Ω)t}|ψ_in⟩, through the analytic eigensystem when one exists"""
    model = _resolve_model(omega, model)
    if t == 0:
        return psi_in
    if isinstance(model, LambdaModel) and omega.omega_plus > 0:
        eig = three_level_eigensystem(*omega.omegas)
        vectors = eig.eigenvectors
        amplitudes = vectors @ (np.exp(-1j * eig.eigenvalues * t) * (vectors.conj().T @ psi_in.amplitudes))
        return QuantumState(amplitudes=amplitudes)
    return qcore.evolve(model.hamiltonian(omega.omegas), t, psi_in)


def state_derivatives_analytic(omega: RabiParameters, t: float, psi_in: QuantumState) -> StateDerivatives:
    """
    Partials of the three-level output state expanded in the (Φ₀, Φ₊, Φ₋) basis

    Args:
        omega: Two Rabi frequencies with Ω₊ > 0
        t: Evolution time
        psi_in: Probe state

    Returns:
        StateDerivatives tagged "analytic"
    """
    if omega.count != 2:
        raise InputValidationError("Analytic derivatives exist for the three-level system only")
    jacobian = parameter_jacobian(*omega.omegas)
    op = jacobian.omega_plus
    basis = mixing_basis(omega.theta)
    c0, c_plus, c_minus = basis.conj().T @ psi_in.amplitudes

    e = np.exp(-1j * op * t)
    p = e - 1.0
    partials = []
    for d_theta, d_plus in zip(jacobian.d_theta, jacobian.d_omega_plus):
        coefficients = np.array(
            [
                d_theta * SQRT_HALF * (c_plus * p + c_minus * np.conj(p)),
                -1j * t * d_plus * c_plus * e + c0 * d_theta * SQRT_HALF * p,
                1j * t * d_plus * c_minus * np.conj(e) + c0 * d_theta * SQRT_HALF * np.conj(p),
            ]
        )
        partials.append(basis @ coefficients)

    base_coefficients = np.array([c0, c_plus * e, c_minus * np.conj(e)])
    base = QuantumState(amplitudes=basis @ base_coefficients)
    return StateDerivatives(base=base, partials=partials, method="analytic")


def state_derivatives_fd(
    omega: RabiParameters,
    t: float,
    psi_in: QuantumState,
    step: float = None,
    model: Optional[RabiModel] = None,
) -> StateDerivatives:
    """
    Central differences of e^{−iH(Ω)t}|ψ_in⟩ with h_i = step·(1 + |Ωᵢ|).

    The differenced states are not phase aligned: the family has no gauge
    freedom, so the raw difference is the derivative.
    """
    step = settings.FD_RELATIVE_STEP if step is None else step
    if not step > 0:
        raise InputValidationError(f"Finite-difference step must be positive, got {step}")
    model = _resolve_model(omega, model)
    center = omega.as_array()
    partials = []
    for i in range(omega.count):
        h = step * (1.0 + abs(center[i]))
        shift = np.zeros_like(center)
        shift[i] = h
        forward = qcore.evolve(model.hamiltonian(center + shift), t, psi_in).amplitudes
        backward = qcore.evolve(model.hamiltonian(center - shift), t, psi_in).amplitudes
        partials.append((forward - backward) / (2.0 * h))
    base = qcore.evolve(model.hamiltonian(center), t, psi_in)
    return StateDerivatives(base=base, partials=partials, method="finite-difference")


def _propagator_derivatives(hamiltonian: np.ndarray, generators: np.ndarray, t: float):
    """e^{−iHt} and its derivatives along each generator via divided differences"""
    values, vectors = np.linalg.eigh(hamiltonian)
    gap = values[:, None] - values[None, :]
    mean = values[:, None] + values[None, :]
    # np.sinc(x) = sin(πx)/(πx)
    kernel = -1j * t * np.exp(-0.5j * mean * t) * np.sinc(gap * t / (2.0 * np.pi))
    unitary = (vectors * np.exp(-1j * values * t)) @ vectors.conj().T
    derivatives = [
        vectors @ (kernel * (vectors.conj().T @ g @ vectors)) @ vectors.conj().T
        for g in generators
    ]
    return unitary, derivatives


def state_derivatives_spectral(
    omega: RabiParameters,
    t: float,
    psi_in: QuantumState,
    model: Optional[RabiModel] = None,
) -> StateDerivatives:
    """Exact partials for any model, including degenerate points such as ΔΩ = 0"""
    model = _resolve_model(omega, model)
    h = qcore.check_hermitian(model.hamiltonian(omega.omegas))
    unitary, derivatives = _propagator_derivatives(h, model.generators(), t)
    base = QuantumState.from_vector(unitary @ psi_in.amplitudes)
    partials = [d @ psi_in.amplitudes for d in derivatives]
    return StateDerivatives(base=base, partials=partials, method="spectral")


def state_derivatives(
    omega: RabiParameters,
    t: float,
    psi_in: QuantumState,
    model: Optional[RabiModel] = None,
    method: DerivativeMethod = "auto",
) -> StateDerivatives:
    """Analytic derivatives when the Λ parameterization is regular, spectral otherwise"""
    model = _resolve_model(omega, model)
    if method == "auto":
        regular = isinstance(model, LambdaModel) and omega.omega_plus > 0
        method = "analytic" if regular else "spectral"
    if method == "analytic":
        return state_derivatives_analytic(omega, t, psi_in)
    if method == "finite-difference":
        return state_derivatives_fd(omega, t, psi_in, model=model)
    if method == "spectral":
        return state_derivatives_spectral(omega, t, psi_in, model=model)
    raise InputValidationError(f"Unknown derivative method {method!r}")


def sld_pure(derivs: StateDerivatives, i: int) -> np.ndarray:
    """L_i = 2(|∂ᵢψ⟩⟨ψ| + |ψ⟩⟨∂ᵢψ|)"""
    if not 0 <= i < derivs.count:
        raise InputValidationError(f"Parameter index {i} outside [0, {derivs.count})")
    psi = derivs.base.amplitudes
    d = derivs.partials[i]
    return 2.0 * (np.outer(d, psi.conj()) + np.outer(psi, d.conj()))


def qfim_pure(derivs: StateDerivatives) -> QfimResult:
    gram = derivs.gram()
    overlaps = derivs.overlaps()
    matrix = np.real(2.0 * (gram + gram.T) + 4.0 * np.outer(overlaps, overlaps))
    matrix = 0.5 * (matrix + matrix.T)
    residuals = np.imag(gram)

    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues[0] <= 0:
        condition = math.inf
    else:
        condition = float(eigenvalues[-1] / eigenvalues[0])
    singular = condition > settings.SINGULAR_CONDITION
    if singular:
        logger.debug(f"QFIM singular, condition number {condition:.3e}")
    return QfimResult(
        matrix=matrix,
        commutation_residuals=residuals,
        singular=singular,
        condition_number=condition,
        method=derivs.method,
    )


def reparameterized_qfim(matrix: np.ndarray, jacobian: ParameterJacobian) -> np.ndarray:
    """Gᵀ K G: information in (Ω₁, Ω₂) from information K in (ϑ, Ω₊)"""
    g = jacobian.matrix()
    return g.T @ np.asarray(matrix, dtype=float) @ g


def qfim_singular_form(omega: RabiParameters, t: float, coeffs: ProbeCoefficients) -> np.ndarray:
    """Rank-one QFIM at singular times Ω₊t = 2nπ"""
    jacobian = parameter_jacobian(*omega.omegas)
    if abs(math.sin(jacobian.omega_plus * t / 2.0)) >= settings.SINGULAR_TIME_TOL:
        raise InputValidationError(
            f"Ω₊t = {jacobian.omega_plus * t!r} is not a singular time; use qfim_closed_form"
        )
    imbalance = abs(coeffs.c_plus) ** 2 - abs(coeffs.c_minus) ** 2
    prefactor = 4.0 * t * t * (1.0 - coeffs.c0 ** 2 - imbalance ** 2)
    w = np.array(jacobian.d_omega_plus)
    return prefactor * np.outer(w, w)


def cfi_from_povm(
    omega: RabiParameters,
    t: float,
    psi_in: QuantumState,
    povm: Povm,
    offset: float = 0.0,
    direction: Optional[Sequence[float]] = None,
    rng: Optional[RngStream] = None,
    model: Optional[RabiModel] = None,
) -> np.ndarray:
    """
    Classical Fisher information of the POVM outcome distribution

    Args:
        omega: Parameter point
        t: Evolution time
        psi_in: Probe state
        povm: Measurement, usually built at the unshifted point
        offset: Evaluate at Ω + offset·u instead of Ω
        direction: Unit direction u; drawn from rng when omitted
        rng: Stream for the random direction
        model: Hamiltonian family, inferred from the parameter count by default

    Returns:
        p×p real symmetric matrix
    """
    if offset < 0:
        raise InputValidationError(f"offset must be non-negative, got {offset}")
    model = _resolve_model(omega, model)
    point = omega
    if offset > 0:
        if direction is None:
            u = (rng or RngStream(settings.DEFAULT_SEED)).unit_vector(omega.count)
        else:
            u = np.asarray(direction, dtype=float)
            u = u / np.linalg.norm(u)
        point = omega.shifted(offset * u)

    derivs = state_derivatives(point, t, psi_in, model=model)
    psi = derivs.base.amplitudes
    partials = derivs.partials
    probabilities = povm.probabilities(psi)

    p_count = derivs.count
    fisher = np.zeros((p_count, p_count))
    for x in range(povm.size):
        element = povm.elements[x]
        if probabilities[x] >= settings.ZERO_PROBABILITY:
            grad = 2.0 * np.real(partials @ (element.conj().T @ psi).conj())
            fisher += np.outer(grad, grad) / probabilities[x]
            continue
        if povm.is_zero(x):
            continue
        gamma = povm.rank_one_vector(x)
        if gamma is None:
            logger.warning(f"Dropping outcome {x} of POVM '{povm.label}': zero probability on a non-projector element")
            continue
        a = partials @ gamma.conj()
        fisher += 4.0 * np.real(np.outer(a.conj(), a))
    return 0.5 * (fisher + fisher.T)


def check_weak_commutation(derivs: StateDerivatives) -> float:
    """max over i < j of |Im⟨∂ᵢψ|∂ⱼψ⟩|"""
    if derivs.count < 2:
        return 0.0
    residuals = np.imag(derivs.gram())
    return float(np.max(np.abs(residuals[np.triu_indices(derivs.count, k=1)])))
