#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Tests for the closed-form QFIM, the optimal probe and measurement, and the
precision bounds
"""
import sys
import math
import logging
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the path so we can import our modules
project_root = str(Path(__file__).parent.parent.absolute())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.core.errors import DegenerateSpectrumError, InfiniteBoundError, InputValidationError, SingularTimeError
from app.schemas.estimation import ProbeCoefficients, StateDerivatives
from app.schemas.quantum import QuantumState
from app.schemas.rabi import RabiParameters
from app.services import closed_form, qcore
from app.services.qfim_engine import qfim_pure, state_derivatives
from app.services.rabi_models import LambdaModel
from app.services.rng import RngStream

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

OMEGA = RabiParameters.of(0.3, 0.7)


def test_closed_form_qfim_matches_engine():
    rng = RngStream(21)
    for t in (0.7, 3.0, 11.0):
        probe = closed_form.random_probe(rng)
        closed = closed_form.qfim_closed_form(OMEGA, t, probe)
        engine = qfim_pure(state_derivatives(OMEGA, t, probe.to_state(OMEGA))).matrix
        assert np.linalg.norm(closed - engine) / np.linalg.norm(engine) < 1e-9


def test_abc_coefficients_respect_inequalities():
    rng = RngStream(22)
    probe = closed_form.random_probe(rng)
    cf = closed_form.closed_form_coefficients(OMEGA.omega_plus, 4.0, probe)
    assert cf.has_abc
    assert -1e-12 <= cf.a <= 4 * abs(cf.p) ** 2 + 1e-12
    assert cf.b <= 4 * 16.0 + 1e-12
    assert cf.a * cf.b - cf.c ** 2 >= -1e-12


def test_optimal_probe_attains_minimum():
    t = 5.0
    optimal = closed_form.optimal_probe_coefficients(OMEGA.omega_plus, t)
    assert optimal.c0 == 0.0
    minimum = closed_form.min_trace_inverse(OMEGA.omega_plus, t)
    assert minimum == pytest.approx(0.09463, abs=1e-5)
    assert closed_form.trace_inverse_closed_form(OMEGA, t, optimal) == pytest.approx(minimum, rel=1e-12)

    cf = closed_form.closed_form_coefficients(OMEGA.omega_plus, t, optimal)
    assert cf.a == pytest.approx(4 * abs(cf.p) ** 2, rel=1e-10)
    assert cf.b == pytest.approx(4 * t * t, rel=1e-10)
    assert abs(cf.c) < 1e-10

    state = closed_form.optimal_probe_state(OMEGA, t)
    assert qcore.phase_equivalent(ProbeCoefficients.from_state(state, OMEGA).to_state(OMEGA), state)


def test_min_trace_inverse_limits_and_singularity():
    assert closed_form.min_trace_inverse(0.0, 2.0) == pytest.approx(0.5)
    assert closed_form.min_trace_inverse(1e-9, 2.0) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(InfiniteBoundError):
        closed_form.min_trace_inverse(0.5, 4 * math.pi)
    with pytest.raises(InputValidationError):
        closed_form.min_trace_inverse(0.5, 0.0)


def test_is_singular_time():
    assert closed_form.is_singular_time(0.5, 4 * math.pi)
    assert closed_form.is_singular_time(0.5, 8 * math.pi)
    assert not closed_form.is_singular_time(0.5, 1e-4)
    assert not closed_form.is_singular_time(0.5, 1.0)


def test_optimal_probe_undefined_at_singular_time():
    with pytest.raises(SingularTimeError):
        closed_form.optimal_probe_coefficients(0.5, 4 * math.pi)
    with pytest.raises(SingularTimeError):
        closed_form.trace_inverse_closed_form(
            RabiParameters.of(0.6, 0.8), 4 * math.pi, ProbeCoefficients(c0=1.0, c_plus=0, c_minus=0)
        )


def test_random_probes_never_beat_minimum():
    result = closed_form.random_probe_search(OMEGA, 5.0, 10_000, RngStream(23))
    assert result.violations == 0
    assert result.best_trace_inverse >= result.min_trace_inverse - 1e-9
    assert result.slack >= -1e-9


def test_joint_and_separate_bounds_at_quarter_period():
    omega_plus = 0.1
    t = (math.pi / 2) / omega_plus
    assert closed_form.joint_bound(1, t, omega_plus) == pytest.approx(0.0045264, abs=1e-7)
    assert closed_form.separate_bound(1, t) == pytest.approx(0.0081057, abs=1e-7)
    with pytest.raises(InputValidationError):
        closed_form.joint_bound(0, t, omega_plus)


def test_controlled_bound_values():
    assert closed_form.controlled_bound(1, 5.0, (0.0, 0.0)) == pytest.approx(0.04)
    assert closed_form.controlled_bound(1, 5.0, (0.3,)) == pytest.approx(0.044213, abs=1e-6)
    assert closed_form.controlled_bound(1, 5.0, (0.3, 0.0)) == closed_form.controlled_bound(1, 5.0, (-0.3, 0.0))
    assert math.isinf(closed_form.controlled_bound(1, 5.0, (2 * math.pi / 5,)))
    quadratic = 1 / 25 + 0.09 / 24
    assert quadratic == pytest.approx(0.04375)
    assert abs(closed_form.controlled_bound(1, 5.0, (0.3,)) - quadratic) < 1e-3


def test_controlled_bound_series_is_continuous():
    t = 5.0
    below = closed_form.controlled_bound(1, t, (2 * 0.99e-4 / t,))
    above = closed_form.controlled_bound(1, t, (2 * 1.01e-4 / t,))
    assert below == pytest.approx(above, rel=1e-8)


def test_crossover_point():
    x_star = closed_form.crossover_point()
    assert x_star == pytest.approx(3.4285, abs=1e-4)
    assert abs(x_star - 2 * math.sqrt(3) * math.sin(x_star / 2)) < 1e-9
    assert closed_form.crossover_time(0.1) == pytest.approx(x_star / 0.1)


def test_bound_report_regimes():
    omega_plus = 0.1
    assert closed_form.bound_report(1, (math.pi / 2) / omega_plus, omega_plus).regime == "joint-wins"
    assert closed_form.bound_report(1, 5.0 / omega_plus, omega_plus).regime == "separate-wins"
    singular = closed_form.bound_report(1, 2 * math.pi / omega_plus, omega_plus)
    assert math.isinf(singular.joint)
    assert singular.regime == "separate-wins"


def test_multilevel_bounds():
    report = closed_form.multilevel_bounds(3, 1, 5.0)
    assert report.joint == pytest.approx(0.04)
    assert report.separate == pytest.approx(0.12)
    assert report.ratio == pytest.approx(3.0)
    assert closed_form.multilevel_bounds(1, 1, 5.0).ratio == pytest.approx(1.0)


def test_single_parameter_optimum():
    h1 = LambdaModel().reduced_hamiltonian(0)
    best = closed_form.single_optimal_probe(h1)
    t = 2.0
    assert closed_form.qfi_single(best, h1, t) == pytest.approx(t * t)
    rng = RngStream(24)
    for _ in range(1000):
        assert closed_form.qfi_single(qcore.random_state(3, rng), h1, t) <= t * t + 1e-12


def test_single_parameter_degenerate_generators():
    with pytest.raises(DegenerateSpectrumError):
        closed_form.single_optimal_probe(np.eye(3))
    with pytest.raises(DegenerateSpectrumError):
        closed_form.single_optimal_probe(np.diag([0.0, 1.0, 1.0]))


def test_optimal_povm_reduces_on_dependent_derivatives(caplog):
    base = QuantumState.basis(3, 0)
    derivs = StateDerivatives(
        base=base,
        partials=[[0.0, 1j, 0.0], [0.0, 2j, 0.0]],
        method="finite-difference",
    )
    with caplog.at_level(logging.WARNING):
        povm = closed_form.optimal_povm(base, derivs)
    assert povm.size == 3
    assert povm.note is not None and "reduced" in povm.note
    assert "reduced POVM" in caplog.text


def test_inverse_variance_levels():
    levels = closed_form.inverse_variance_levels(OMEGA, 5.0)
    assert levels["controlled"] == pytest.approx(12.5)
    assert levels["separate"] == pytest.approx(6.25)
    assert levels["uncontrolled_joint"] == pytest.approx(10.567, abs=1e-3)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
