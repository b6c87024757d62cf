"""
Closed-form results for joint estimation of two Rabi frequencies: the P, M, N
and A, B, C coefficients, the explicit QFIM and Tr(J⁻¹), the optimal probe and
saturating measurement, and the joint, separate, controlled and multi-level
precision bounds.

Bounds follow a shared budget: separate estimation spends m experiments on each
parameter while joint estimation spends l·m experiments in total.
"""
import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import optimize

from app.core.config import settings
from app.core.errors import (
    DegenerateSpectrumError,
    InfiniteBoundError,
    InputValidationError,
    RankDeficiencyError,
    SingularQfimError,
    SingularTimeError,
)
from app.schemas.estimation import (
    BoundReport,
    ClosedFormCoefficients,
    ProbeCoefficients,
    ProbeSearchResult,
    StateDerivatives,
)
from app.schemas.quantum import Povm, QuantumState
from app.schemas.rabi import RabiParameters
from app.services import qcore
from app.services.rabi_models import parameter_jacobian
from app.services.rng import RngStream

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


def is_singular_time(omega_plus: float, t: float) -> bool:
    """Ω₊t = 2nπ with n ≥ 1, where the two-frequency QFIM loses rank"""
    return abs(omega_plus * t) > math.pi and abs(math.sin(omega_plus * t / 2.0)) < settings.SINGULAR_TIME_TOL


def _abc_arrays(c0, c_plus, c_minus, p, t):
    """M, N, A, B, C; works elementwise on scalars or arrays"""
    m = np.conj(c_plus) * np.conj(p) + np.conj(c_minus) * p
    n = np.conj(c_plus) * np.conj(p) - np.conj(c_minus) * p
    p_sq = np.abs(p) ** 2
    c0_sq = c0 * c0
    im_m = np.imag(m)
    re_mn = np.real(m * np.conj(n))
    a = -8.0 * c0_sq * im_m ** 2 + 4.0 * c0_sq * p_sq + 2.0 * np.abs(m) ** 2
    b = -4.0 * t * t * re_mn ** 2 / p_sq ** 2 + 4.0 * t * t - 4.0 * c0_sq * t * t
    c = -4.0 * SQRT2 * c0 * im_m * re_mn / p_sq * t + 2.0 * SQRT2 * c0 * t * np.imag(n)
    return m, n, a, b, c


def pmn_coefficients(probe: ProbeCoefficients, omega_plus: float, t: float) -> ClosedFormCoefficients:
    """P = e^{−iΩ₊t} − 1, M = C₊*P* + C₋*P, N = C₊*P* − C₋*P"""
    p = complex(np.exp(-1j * omega_plus * t) - 1.0)
    m = probe.c_plus.conjugate() * p.conjugate() + probe.c_minus.conjugate() * p
    n = probe.c_plus.conjugate() * p.conjugate() - probe.c_minus.conjugate() * p
    return ClosedFormCoefficients(p=p, m=m, n=n, c0=probe.c0, t=t)


def abc_coefficients(coeffs: ClosedFormCoefficients, probe: ProbeCoefficients, t: float) -> ClosedFormCoefficients:
    """
    Fill A, B, C, the entries of the information matrix in (ϑ, Ω₊) coordinates

    Args:
        coeffs: Output of pmn_coefficients
        probe: The probe the coefficients were built from
        t: Evolution time

    Returns:
        A copy of coeffs with a, b and c set
    """
    if abs(coeffs.p) / 2.0 < settings.SINGULAR_TIME_TOL:
        raise SingularTimeError(f"|P| = {abs(coeffs.p):.3e} vanishes; use qfim_singular_form at Ω₊t = 2nπ")
    _, _, a, b, c = _abc_arrays(probe.c0, probe.c_plus, probe.c_minus, coeffs.p, t)
    return ClosedFormCoefficients(
        p=coeffs.p, m=coeffs.m, n=coeffs.n, c0=coeffs.c0, t=t,
        a=float(a), b=float(b), c=float(c),
    )


def closed_form_coefficients(omega_plus: float, t: float, probe: ProbeCoefficients) -> ClosedFormCoefficients:
    return abc_coefficients(pmn_coefficients(probe, omega_plus, t), probe, t)


def qfim_closed_form(omega: RabiParameters, t: float, probe: ProbeCoefficients) -> np.ndarray:
    """J_ij = ∂ᵢϑ∂ⱼϑ·A + ∂ᵢΩ₊∂ⱼΩ₊·B + (∂ᵢϑ∂ⱼΩ₊ + ∂ⱼϑ∂ᵢΩ₊)·C"""
    jacobian = parameter_jacobian(*omega.omegas)
    cf = closed_form_coefficients(jacobian.omega_plus, t, probe)
    theta = np.array(jacobian.d_theta)
    w = np.array(jacobian.d_omega_plus)
    cross = np.outer(theta, w)
    return cf.a * np.outer(theta, theta) + cf.b * np.outer(w, w) + cf.c * (cross + cross.T)


def trace_inverse_closed_form(omega: RabiParameters, t: float, probe: ProbeCoefficients) -> float:
    """Tr(J⁻¹) = (4A + 4Ω₊²B)/(AB − C²)"""
    jacobian = parameter_jacobian(*omega.omegas)
    op = jacobian.omega_plus
    cf = closed_form_coefficients(op, t, probe)
    det = cf.a * cf.b - cf.c * cf.c
    if det <= settings.IDENTITY_TOL * max(abs(cf.a * cf.b), cf.c * cf.c, 1e-300):
        raise SingularQfimError(f"AB − C² = {det:.3e}: the QFIM is not invertible for this probe")
    return (4.0 * cf.a + 4.0 * op * op * cf.b) / det


def optimal_probe_coefficients(omega_plus: float, t: float) -> ProbeCoefficients:
    """C₀ = 0, C₊ = P*/(√2|P|), C₋ = P/(√2|P|)"""
    p = complex(np.exp(-1j * omega_plus * t) - 1.0)
    if abs(p) / 2.0 < settings.SINGULAR_TIME_TOL:
        raise SingularTimeError(f"No probe allows joint estimation at Ω₊t = {omega_plus * t!r}")
    return ProbeCoefficients(
        c0=0.0,
        c_plus=p.conjugate() / (SQRT2 * abs(p)),
        c_minus=p / (SQRT2 * abs(p)),
    )


def optimal_probe_state(omega: RabiParameters, t: float) -> QuantumState:
    """Probe minimizing Tr(J⁻¹), in the computational basis"""
    return optimal_probe_coefficients(omega.omega_plus, t).to_state(omega)


def min_trace_inverse(omega_plus: float, t: float) -> float:
    """min Tr(J⁻¹) = 1/t² + Ω₊²/(4 sin²(Ω₊t/2))"""
    if not t > 0:
        raise InputValidationError(f"Evolution time must be positive, got {t}")
    if omega_plus < 0:
        raise InputValidationError(f"Ω₊ must be non-negative, got {omega_plus}")
    half = omega_plus * t / 2.0
    base = 1.0 / (t * t)
    if half < 1e-6:
        return base * (2.0 + half * half / 3.0)
    s = math.sin(half)
    if abs(s) < settings.SINGULAR_TIME_TOL:
        raise InfiniteBoundError(f"Bound diverges at Ω₊t = {omega_plus * t!r}")
    return base + omega_plus * omega_plus / (4.0 * s * s)


def optimal_povm(base: QuantumState, derivs: StateDerivatives) -> Povm:
    """
    Projective measurement saturating the QCRB: projectors onto the Gram–Schmidt
    orthonormalization γ of (ψ, ∂₁ψ, ∂₂ψ, ...) plus the remainder I − ΣΠ.

    Dependent derivative vectors are skipped, giving a reduced POVM with a note.
    """
    overlaps = np.abs(derivs.overlaps())
    if np.max(overlaps, initial=0.0) > settings.ORTHONORMAL_TOL:
        logger.info(f"⟨ψ|∂ψ⟩ = {overlaps.tolist()}: γ vectors built by Gram–Schmidt against ψ")

    kept = []
    dropped = []
    for index, vector in enumerate([base.amplitudes] + list(derivs.partials)):
        try:
            qcore.orthonormalize(kept + [vector])
            kept.append(vector)
        except RankDeficiencyError:
            dropped.append(index)

    note = None
    if dropped:
        note = f"reduced POVM: vectors {dropped} of (ψ, ∂ψ...) are linearly dependent"
        logger.warning(note)
    return Povm.from_vectors(qcore.orthonormalize(kept), label="saturating", note=note)


def qfi_single(psi_in: QuantumState, h1: np.ndarray, t: float) -> float:
    """J = 4t²(⟨H₁²⟩ − ⟨H₁⟩²)"""
    h = qcore.check_hermitian(h1, name="H₁")
    psi = psi_in.amplitudes
    hpsi = h @ psi
    mean = float(np.real(np.vdot(psi, hpsi)))
    second = float(np.real(np.vdot(hpsi, hpsi)))
    return 4.0 * t * t * max(second - mean * mean, 0.0)


def single_optimal_probe(h1: np.ndarray) -> QuantumState:
    """(|λ_min⟩ + |λ_max⟩)/√2"""
    eig = qcore.hermitian_eig(h1)
    values = eig.eigenvalues
    tol = settings.EIGEN_TOL * max(1.0, float(np.max(np.abs(values))))
    low = int(np.sum(np.abs(values - values[0]) <= tol))
    high = int(np.sum(np.abs(values - values[-1]) <= tol))
    if values[-1] - values[0] <= tol:
        raise DegenerateSpectrumError("H₁ is proportional to the identity; every probe has zero QFI")
    if low > 1 or high > 1:
        raise DegenerateSpectrumError(
            f"Extremal eigenvalues are degenerate (λ_min multiplicity {low}, λ_max multiplicity {high})"
        )
    return QuantumState.from_vector(eig.eigenvectors[:, 0] + eig.eigenvectors[:, -1])


def _check_budget(m: int, t: float) -> None:
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise InputValidationError(f"m must be a positive integer, got {m}")
    if not t > 0:
        raise InputValidationError(f"Evolution time must be positive, got {t}")


def joint_bound(m: int, t: float, omega_plus: float) -> float:
    """1/(2mt²) + Ω₊²/(8m sin²(Ω₊t/2)) for 2m joint experiments"""
    _check_budget(m, t)
    return min_trace_inverse(omega_plus, t) / (2.0 * m)


def separate_bound(m: int, t: float, levels: int = 2) -> float:
    """l/(mt²) for m experiments on each of l parameters"""
    _check_budget(m, t)
    if levels < 1:
        raise InputValidationError(f"levels must be at least 1, got {levels}")
    return levels / (m * t * t)


def controlled_bound(m: int, t: float, delta_omega: Sequence[float]) -> float:
    """
    Total variance of the controlled scheme with control error ΔΩ

    1/(2mt²) + ‖ΔΩ‖²/(8m sin²(‖ΔΩ‖t/2)), tending to 1/(mt²) as ΔΩ → 0.
    Returns inf at ‖ΔΩ‖t = 2nπ, n ≥ 1.
    """
    _check_budget(m, t)
    x = float(np.linalg.norm(np.asarray(delta_omega, dtype=float)))
    half = x * t / 2.0
    base = 1.0 / (2.0 * m * t * t)
    if half < 1e-4:
        h2 = half * half
        return base * (2.0 + h2 / 3.0 + h2 * h2 / 15.0)
    s = math.sin(half)
    if abs(s) < settings.SINGULAR_TIME_TOL:
        logger.debug(f"Controlled bound diverges at ‖ΔΩ‖t = {x * t!r}")
        return math.inf
    return base + x * x / (8.0 * m * s * s)


def _regime(joint: float, separate: float) -> str:
    if math.isinf(joint):
        return "separate-wins"
    if abs(joint - separate) <= 1e-12 * max(joint, separate):
        return "tie"
    return "joint-wins" if joint < separate else "separate-wins"


def bound_report(m: int, t: float, omega_plus: float, delta_omega: Optional[Sequence[float]] = None) -> BoundReport:
    """Joint, separate and controlled bounds for two frequencies at one (m, t, Ω₊)"""
    try:
        joint = joint_bound(m, t, omega_plus)
    except InfiniteBoundError:
        joint = math.inf
    separate = separate_bound(m, t)
    controlled = controlled_bound(m, t, delta_omega if delta_omega is not None else (0.0, 0.0))
    return BoundReport(
        joint=joint,
        separate=separate,
        controlled=controlled,
        regime=_regime(joint, separate),
        m=m,
        t=t,
        levels=2,
        omega_plus=omega_plus,
    )


def multilevel_bounds(l: int, m: int, t: float) -> BoundReport:
    """Controlled joint 1/(mt²) against separate l/(mt²)"""
    if l < 1:
        raise InputValidationError(f"l must be at least 1, got {l}")
    _check_budget(m, t)
    joint = 1.0 / (m * t * t)
    separate = separate_bound(m, t, levels=l)
    return BoundReport(
        joint=joint,
        separate=separate,
        controlled=joint,
        regime=_regime(joint, separate),
        m=m,
        t=t,
        levels=l,
    )


def crossover_point() -> float:
    """Root x* of x = 2√3 sin(x/2) in [π, 4], where joint and separate bounds meet"""
    return float(optimize.bisect(lambda x: x - 2.0 * math.sqrt(3.0) * math.sin(x / 2.0), math.pi, 4.0, xtol=1e-10))


def crossover_time(omega_plus: float) -> float:
    if not omega_plus > 0:
        raise InputValidationError(f"Ω₊ must be positive, got {omega_plus}")
    return crossover_point() / omega_plus


def random_probe(rng: RngStream) -> ProbeCoefficients:
    """Gaussian draw normalized on the sphere, phase-rotated so C₀ is real"""
    draws = rng.normal(6)
    return ProbeCoefficients.normalized(*(draws[:3] + 1j * draws[3:]))


def random_probe_search(
    omega: RabiParameters,
    t: float,
    samples: int,
    rng: RngStream,
    tol: float = 1e-9,
) -> ProbeSearchResult:
    """
    Evaluate Tr(J⁻¹) for many random probes and count those below the minimum

    Args:
        omega: Two Rabi frequencies
        t: Evolution time off singular points
        samples: Number of probes
        rng: Random stream
        tol: Allowed undercut of the closed-form minimum

    Returns:
        ProbeSearchResult with the best value found
    """
    if samples < 1:
        raise InputValidationError(f"samples must be at least 1, got {samples}")
    jacobian = parameter_jacobian(*omega.omegas)
    op = jacobian.omega_plus
    p = complex(np.exp(-1j * op * t) - 1.0)
    if abs(p) / 2.0 < settings.SINGULAR_TIME_TOL:
        raise SingularTimeError(f"Random search needs Ω₊t off 2nπ, got {op * t!r}")

    draws = rng.normal((samples, 6))
    vectors = draws[:, :3] + 1j * draws[:, 3:]
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    phases = np.ones(samples, dtype=complex)
    nonzero = np.abs(vectors[:, 0]) > 0
    phases[nonzero] = np.conj(vectors[nonzero, 0]) / np.abs(vectors[nonzero, 0])
    vectors *= phases[:, None]

    _, _, a, b, c = _abc_arrays(vectors[:, 0].real, vectors[:, 1], vectors[:, 2], p, t)
    det = a * b - c * c
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(
            det > settings.IDENTITY_TOL * np.maximum(np.abs(a * b), 1e-300),
            (4.0 * a + 4.0 * op * op * b) / det,
            np.inf,
        )
    minimum = min_trace_inverse(op, t)
    violations = int(np.sum(values < minimum - tol))
    if violations:
        logger.warning(f"{violations} random probes undercut min Tr(J⁻¹) = {minimum!r}")
    return ProbeSearchResult(
        samples=samples,
        best_trace_inverse=float(np.min(values)),
        min_trace_inverse=minimum,
        violations=violations,
    )


def inverse_variance_levels(omega: RabiParameters, t: float) -> Dict[str, float]:
    """
    Reference levels of 1/(M·Tr Cov) for M total measurements

    controlled t²/l, separate t²/l², and for two frequencies the uncontrolled
    joint level 1/min Tr(J⁻¹).
    """
    levels = omega.count
    result = {
        "controlled": t * t / levels,
        "separate": t * t / (levels * levels),
    }
    if levels == 2:
        try:
            result["uncontrolled_joint"] = 1.0 / min_trace_inverse(omega.omega_plus, t)
        except InfiniteBoundError:
            result["uncontrolled_joint"] = 0.0
    return result
