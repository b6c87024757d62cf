#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Tests for the dense linear algebra core, POVMs and the seeded random stream
"""
import sys
import logging
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add the project root to the path so we can import our modules
project_root = str(Path(__file__).parent.parent.absolute())
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from app.core.errors import InputValidationError, RankDeficiencyError
from app.schemas.quantum import Povm, QuantumState
from app.services import qcore
from app.services.rng import RngStream

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def test_propagator_of_zero_is_identity():
    assert np.allclose(qcore.propagator(np.zeros((3, 3)), 7.0), np.eye(3), atol=1e-15)


def test_propagator_is_unitary_and_matches_batch():
    rng = RngStream(11)
    stack = np.stack([qcore.random_hermitian(4, rng) for _ in range(5)])
    batch = qcore.propagator_batch(stack, 1.3)
    for h, u in zip(stack, batch):
        single = qcore.propagator(h, 1.3)
        assert np.allclose(single.conj().T @ single, np.eye(4), atol=1e-10)
        assert np.allclose(u, single, atol=1e-12)


def test_check_hermitian_rejects_asymmetric_matrix():
    with pytest.raises(InputValidationError):
        qcore.check_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InputValidationError):
        qcore.check_hermitian(np.zeros((2, 3)))


def test_hermitian_eig_reconstructs_matrix():
    rng = RngStream(3)
    h = qcore.random_hermitian(5, rng)
    eig = qcore.hermitian_eig(h)
    assert np.all(np.diff(eig.eigenvalues) >= 0)
    assert np.allclose(eig.reconstruct(), h, atol=1e-10)
    assert eig.residual(h) < 1e-10


def test_evolve_preserves_norm_and_zero_time():
    rng = RngStream(5)
    psi = qcore.random_state(4, rng)
    h = qcore.random_hermitian(4, rng)
    assert qcore.evolve(h, 0.0, psi) is psi
    out = qcore.evolve(h, 12.5, psi)
    assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12


def test_evolution_composes_over_split_times():
    rng = RngStream(6)
    psi = qcore.random_state(4, rng)
    h = qcore.random_hermitian(4, rng)
    t1, t2 = 1.7, 3.4
    assert np.allclose(
        qcore.propagator(h, t1 + t2), qcore.propagator(h, t2) @ qcore.propagator(h, t1), atol=1e-10
    )
    stepped = qcore.evolve(h, t2, qcore.evolve(h, t1, psi))
    assert np.allclose(qcore.evolve(h, t1 + t2, psi).amplitudes, stepped.amplitudes, atol=1e-10)


def test_orthonormalize_and_rank_deficiency_index():
    vectors = [np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 2.0])]
    basis = qcore.orthonormalize(vectors)
    gram = np.array([[np.vdot(a, b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(3), atol=1e-12)

    with pytest.raises(RankDeficiencyError) as excinfo:
        qcore.orthonormalize([vectors[0], vectors[1], vectors[0] - 2 * vectors[1]])
    assert excinfo.value.index == 2


def test_phase_equivalent():
    rng = RngStream(8)
    psi = qcore.random_state(3, rng)
    assert qcore.phase_equivalent(psi, np.exp(0.7j) * psi.amplitudes)
    assert not qcore.phase_equivalent(QuantumState.basis(3, 0), QuantumState.basis(3, 1))


def test_quantum_state_requires_unit_norm():
    with pytest.raises(ValidationError):
        QuantumState(amplitudes=[1.0, 1.0])
    state = QuantumState.from_vector([3.0, 4.0j])
    assert state.dim == 2
    assert abs(state.inner(state) - 1.0) < 1e-15


def test_povm_validation_and_rank_one_detection():
    povm = Povm.computational(3)
    assert povm.size == 3
    assert np.allclose(povm.rank_one_vector(1), [0, 1, 0]) or np.allclose(povm.rank_one_vector(1), [0, -1, 0])

    reduced = Povm.from_vectors([np.array([1.0, 0.0, 0.0])])
    assert reduced.size == 2
    assert reduced.rank_one_vector(1) is None

    with pytest.raises(ValidationError):
        Povm(elements=[np.eye(2), np.eye(2)])


def test_sample_measurement_is_reproducible():
    psi = QuantumState.from_vector([1.0, 1.0, 1.0])
    povm = Povm.computational(3)
    first = qcore.sample_measurement(psi, povm, 1000, RngStream(42))
    second = qcore.sample_measurement(psi, povm, 1000, RngStream(42))
    assert first.tolist() == second.tolist()
    assert first.sum() == 1000

    with pytest.raises(InputValidationError):
        qcore.sample_measurement(psi, povm, 0, RngStream(42))


def test_sample_measurement_follows_born_rule():
    psi = QuantumState.from_vector([1.0, np.sqrt(2.0), 1.0])
    shots = 1_000_000
    counts = qcore.sample_measurement(psi, Povm.computational(3), shots, RngStream(7))
    expected = np.array([0.25, 0.5, 0.25])
    sigma = np.sqrt(expected * (1 - expected) / shots)
    assert np.all(np.abs(counts / shots - expected) < 5 * sigma)


def test_rng_seed_range_and_spawn():
    with pytest.raises(InputValidationError):
        RngStream(-1)
    with pytest.raises(InputValidationError):
        RngStream(2 ** 64)
    with pytest.raises(InputValidationError):
        RngStream(True)
    top = RngStream(2 ** 64 - 1)
    assert top.seed == 2 ** 64 - 1

    children = RngStream(9).spawn(2)
    again = RngStream(9).spawn(2)
    assert children[0].normal(4).tolist() == again[0].normal(4).tolist()
    assert children[0].spawn_key != children[1].spawn_key

    seeds = [child.derive_seed() for child in RngStream(9).spawn(2)]
    assert seeds == [child.derive_seed() for child in RngStream(9).spawn(2)]
    assert seeds[0] != seeds[1]
    assert all(0 <= s < 2 ** 64 for s in seeds)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
