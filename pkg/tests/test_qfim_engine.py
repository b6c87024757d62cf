#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Tests for output states, state derivatives, the pure-state QFIM, SLDs and the
classical Fisher information of a POVM
"""
import sys
import math
import logging
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add the project root to the path so we can import our modules
project_root = str(Path(__file__).parent.parent.absolute())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.core.errors import InputValidationError, SingularQfimError
from app.schemas.estimation import StateDerivatives
from app.schemas.quantum import Povm, QuantumState
from app.schemas.rabi import RabiParameters
from app.services import qcore
from app.services.closed_form import optimal_povm, optimal_probe_state, random_probe
from app.services.qfim_engine import (
    cfi_from_povm,
    check_weak_commutation,
    output_state,
    qfim_pure,
    qfim_singular_form,
    reparameterized_qfim,
    sld_pure,
    state_derivatives,
    state_derivatives_analytic,
    state_derivatives_fd,
    state_derivatives_spectral,
)
from app.services.rabi_models import StarModel, parameter_jacobian, three_level_hamiltonian
from app.services.rng import RngStream

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

OMEGA = RabiParameters.of(0.3, 0.7)


def _random_probe_state(seed: int) -> QuantumState:
    return qcore.random_state(3, RngStream(seed))


def test_output_state_matches_numeric_evolution():
    psi = _random_probe_state(1)
    analytic = output_state(OMEGA, 5.0, psi)
    numeric = qcore.evolve(three_level_hamiltonian(0.3, 0.7), 5.0, psi)
    assert np.allclose(analytic.amplitudes, numeric.amplitudes, atol=1e-12)
    assert output_state(OMEGA, 0.0, psi) is psi


def test_analytic_spectral_and_fd_derivatives_agree():
    psi = _random_probe_state(2)
    analytic = state_derivatives_analytic(OMEGA, 5.0, psi)
    spectral = state_derivatives_spectral(OMEGA, 5.0, psi)
    fd = state_derivatives_fd(OMEGA, 5.0, psi)
    assert np.allclose(analytic.partials, spectral.partials, atol=1e-10)
    assert np.allclose(analytic.partials, fd.partials, atol=1e-7)
    assert np.allclose(analytic.base.amplitudes, spectral.base.amplitudes, atol=1e-12)


def test_derivative_dispatch():
    psi = _random_probe_state(3)
    assert state_derivatives(OMEGA, 1.0, psi).method == "analytic"
    assert state_derivatives(RabiParameters.of(0.0, 0.0), 1.0, psi).method == "spectral"
    with pytest.raises(InputValidationError):
        state_derivatives(OMEGA, 1.0, psi, method="symbolic")
    with pytest.raises(InputValidationError):
        state_derivatives_fd(OMEGA, 1.0, psi, step=0.0)


def test_norm_drift_warns_only_for_finite_differences(caplog):
    base = QuantumState(amplitudes=[1.0, 0.0, 0.0])
    drifting = [[0.5, 0.0, 0.0]]
    with caplog.at_level(logging.WARNING, logger="app.schemas.estimation"):
        derivs = StateDerivatives(base=base, partials=drifting, method="finite-difference")
    assert derivs.method == "finite-difference"
    assert any("Finite-difference" in record.getMessage() for record in caplog.records)
    for method in ("analytic", "spectral"):
        with pytest.raises(ValidationError, match="norm preservation"):
            StateDerivatives(base=base, partials=drifting, method=method)


def test_qfim_matches_sld_expectation():
    psi = _random_probe_state(4)
    derivs = state_derivatives(OMEGA, 3.0, psi)
    result = qfim_pure(derivs)
    rho = derivs.base.density_matrix()
    for i in range(2):
        for j in range(2):
            li, lj = sld_pure(derivs, i), sld_pure(derivs, j)
            expected = 0.5 * np.trace(rho @ (li @ lj + lj @ li)).real
            assert result.matrix[i, j] == pytest.approx(expected, rel=1e-9, abs=1e-12)
    with pytest.raises(InputValidationError):
        sld_pure(derivs, 2)


def test_optimal_probe_qfim_and_trace_inverse():
    probe = optimal_probe_state(OMEGA, 5.0)
    result = qfim_pure(state_derivatives(OMEGA, 5.0, probe))
    assert not result.singular
    assert result.trace_inverse() == pytest.approx(0.09463, abs=1e-5)
    assert check_weak_commutation(state_derivatives(OMEGA, 5.0, probe)) < 1e-10


def test_reparameterized_qfim_round_trip():
    psi = _random_probe_state(5)
    matrix = qfim_pure(state_derivatives(OMEGA, 2.0, psi)).matrix
    jacobian = parameter_jacobian(0.3, 0.7)
    g = jacobian.matrix()
    inner = np.linalg.inv(g).T @ matrix @ np.linalg.inv(g)
    assert np.allclose(reparameterized_qfim(inner, jacobian), matrix, atol=1e-10)


def test_singular_time_qfim_is_rank_one():
    t = 2 * math.pi / OMEGA.omega_plus
    probe = random_probe(RngStream(6))
    result = qfim_pure(state_derivatives(OMEGA, t, probe.to_state(OMEGA)))
    assert result.singular
    with pytest.raises(SingularQfimError):
        result.inverse()
    assert np.allclose(qfim_singular_form(OMEGA, t, probe), result.matrix, atol=1e-8 * np.max(result.matrix))
    with pytest.raises(InputValidationError):
        qfim_singular_form(OMEGA, 1.0, probe)


def test_star_model_controlled_qfim_is_diagonal():
    model = StarModel(4)
    zero = RabiParameters(omegas=(0.0,) * 4)
    result = qfim_pure(state_derivatives(zero, 3.0, model.probe(), model=model))
    assert np.allclose(result.matrix, 9.0 * np.eye(4), atol=1e-10)
    assert result.max_residual() < 1e-12


def test_cfi_never_exceeds_qfim():
    psi = _random_probe_state(7)
    derivs = state_derivatives(OMEGA, 4.0, psi)
    qfim = qfim_pure(derivs).matrix
    cfi = cfi_from_povm(OMEGA, 4.0, psi, Povm.computational(3))
    assert np.linalg.eigvalsh(qfim - cfi)[0] > -1e-9


def test_cfi_of_saturating_povm_approaches_qfim():
    probe = optimal_probe_state(OMEGA, 5.0)
    derivs = state_derivatives(OMEGA, 5.0, probe)
    qfim = qfim_pure(derivs).matrix
    povm = optimal_povm(derivs.base, derivs)
    assert povm.label == "saturating"

    at_point = cfi_from_povm(OMEGA, 5.0, probe, povm)
    assert np.allclose(at_point, qfim, rtol=1e-8, atol=1e-10)

    errors = [
        np.linalg.norm(cfi_from_povm(OMEGA, 5.0, probe, povm, offset=d, direction=(0.6, 0.8)) - qfim)
        / np.linalg.norm(qfim)
        for d in (1e-2, 1e-3, 1e-4)
    ]
    assert errors[2] < errors[1] < errors[0]
    assert errors[2] < 1e-2
    with pytest.raises(InputValidationError):
        cfi_from_povm(OMEGA, 5.0, probe, povm, offset=-1.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
