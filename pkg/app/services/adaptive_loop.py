"""
Control-enhanced sequential estimation: interleaved control unitaries, round
simulation, cumulative maximum likelihood and the adaptive protocol itself.

Each round evolves the probe under (U_c U_dt)^N with U_c = e^{iH(Ω̂)dt} built
from the current estimate, which approximates e^{−iH(Ω−Ω̂)t}. The likelihood of
a candidate always uses the control each round was actually run with.

The probe-level return probability cos²(‖Ω−Ω̂‖t/2) repeats every 2π/t, so a
control sitting one period away from the truth yields the same counts as an
exact one. Whenever a distant likelihood mode stays within ALIAS_LOG_RATIO of
the estimate, the next round is run under an offset control that separates
the two instead of under the estimate itself.

Estimates stay inside a trust region around the initial guess, TRUST_RADIUS_FRACTION
of a period wide by default, which keeps the ring of exact aliases around the
truth out of the search.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from app.core.config import settings
from app.core.errors import InputValidationError
from app.core.metrics import ADAPTIVE_ROUNDS, LIKELIHOOD_EVALUATIONS
from app.schemas.adaptive import AdaptiveConfig, AdaptiveTrace, RoundRecord
from app.schemas.estimation import QfimResult
from app.schemas.quantum import Povm, QuantumState
from app.schemas.rabi import RabiParameters
from app.services import qcore
from app.services.cache_service import unitary_cache
from app.services.closed_form import controlled_bound
from app.services.qfim_engine import cfi_from_povm, qfim_pure, state_derivatives
from app.services.rabi_models import RabiModel, StarModel, default_model, model_for
from app.services.rng import RngStream

logger = logging.getLogger(__name__)

MAX_GRID_CANDIDATES = 2_000_000


def _vector(values: Sequence[float]) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1)


def _model(count: int, model: Optional[RabiModel]) -> RabiModel:
    model = model or default_model(count)
    if model.levels != count:
        raise InputValidationError(f"{model!r} expects {model.levels} frequencies, got {count}")
    return model


def _check_segments(n_segments: int) -> None:
    if isinstance(n_segments, bool) or int(n_segments) != n_segments or n_segments < 1:
        raise InputValidationError(f"n_segments must be a positive integer, got {n_segments}")


def control_unitary(model: RabiModel, omega_hat: Sequence[float], dt: float) -> np.ndarray:
    """U_c = e^{iH(Ω̂)dt}, cached per (model, Ω̂, dt)"""
    values = tuple(float(v) for v in _vector(omega_hat))
    key = ("control", model.name, model.levels, values, float(dt))
    return unitary_cache.get(key, lambda: qcore.propagator(model.hamiltonian(values), -dt))


def controlled_evolution(
    omega_true: Sequence[float],
    omega_hat: Sequence[float],
    t: float,
    n_segments: int,
    model: Optional[RabiModel] = None,
) -> np.ndarray:
    """(e^{iH(Ω̂)dt} e^{−iH(Ω)dt})^N with dt = t/N"""
    _check_segments(n_segments)
    truth = _vector(omega_true)
    estimate = _vector(omega_hat)
    model = _model(truth.size, model)
    if np.array_equal(truth, estimate):
        return np.eye(model.dim, dtype=complex)
    dt = t / n_segments
    step = control_unitary(model, estimate, dt) @ qcore.propagator(model.hamiltonian(truth), dt)
    return np.linalg.matrix_power(step, int(n_segments))


def effective_evolution_error(
    omega_true: Sequence[float],
    omega_hat: Sequence[float],
    t: float,
    n_segments: int,
    model: Optional[RabiModel] = None,
) -> float:
    """Spectral-norm distance between the controlled product and e^{−iH(Ω−Ω̂)t}"""
    truth = _vector(omega_true)
    model = _model(truth.size, model)
    exact = qcore.propagator(model.hamiltonian(truth - _vector(omega_hat)), t)
    product = controlled_evolution(truth, omega_hat, t, n_segments, model=model)
    return float(np.linalg.norm(product - exact, 2))


def run_round(
    omega_true: Sequence[float],
    omega_hat: Sequence[float],
    t: float,
    n_segments: int,
    k: int,
    rng: RngStream,
    model: Optional[RabiModel] = None,
) -> RoundRecord:
    """
    Simulate k computational-basis measurements after the controlled evolution

    Args:
        omega_true: Frequencies generating the data
        omega_hat: Estimate the control is built from
        t: Evolution time
        n_segments: Control segments N
        k: Shots in this round
        rng: Random stream owned by the trajectory
        model: Hamiltonian family; Λ for two frequencies by default

    Returns:
        RoundRecord with the counts and the control estimate used
    """
    truth = _vector(omega_true)
    model = _model(truth.size, model)
    unitary = controlled_evolution(truth, omega_hat, t, n_segments, model=model)
    state = QuantumState.from_vector(unitary @ model.probe().amplitudes, normalize=True)
    counts = qcore.sample_measurement(state, Povm.computational(model.dim), k, rng)
    return RoundRecord(
        control_estimate=tuple(float(v) for v in _vector(omega_hat)),
        counts=tuple(int(c) for c in counts),
        povm_id="computational",
    )


def free_unitaries(model: RabiModel, candidates: np.ndarray, dt: float) -> np.ndarray:
    """e^{−iH(Ω)dt} for each row of a (G, l) candidate array"""
    return qcore.propagator_batch(model.hamiltonian_batch(candidates), dt)


def _probe_column(products: np.ndarray, model: RabiModel, n_segments: int) -> np.ndarray:
    powered = np.linalg.matrix_power(products, int(n_segments))
    probabilities = np.abs(powered[..., :, model.center_level]) ** 2
    return probabilities / probabilities.sum(axis=-1, keepdims=True)


def outcome_probabilities(
    candidates: np.ndarray,
    control_estimate: Sequence[float],
    t: float,
    n_segments: int,
    model: RabiModel,
    free: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Computational-basis outcome probabilities for many candidates under one control

    Args:
        candidates: (G, l) array of candidate frequencies
        control_estimate: Ω̂ of the round
        t: Evolution time
        n_segments: Control segments N
        model: Hamiltonian family
        free: Precomputed free unitaries for the candidates, if any

    Returns:
        (G, d) array of probabilities
    """
    _check_segments(n_segments)
    candidates = np.asarray(candidates, dtype=float).reshape(-1, model.levels)
    dt = t / n_segments
    if free is None:
        free = free_unitaries(model, candidates, dt)
    control = control_unitary(model, control_estimate, dt)
    probabilities = _probe_column(control[None, :, :] @ free, model, n_segments)
    exact = np.all(candidates == _vector(control_estimate)[None, :], axis=1)
    if np.any(exact):
        probabilities[exact] = np.eye(model.dim)[model.center_level]
    return probabilities


def _log_terms(probabilities: np.ndarray, counts: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(probabilities, settings.LIKELIHOOD_FLOOR)) @ counts


def log_likelihood(
    candidate: Sequence[float],
    records: Sequence[RoundRecord],
    t: float,
    n_segments: int,
    model: Optional[RabiModel] = None,
) -> float:
    """Σ_r Σ_x counts_{r,x} ln p_{r,x}(candidate), each round under its own control"""
    if not records:
        raise InputValidationError("log_likelihood needs at least one round")
    _check_segments(n_segments)
    point = _vector(candidate)
    model = _model(point.size, model)
    dt = t / n_segments
    free = qcore.propagator(model.hamiltonian(point), dt)
    controls = np.stack([control_unitary(model, r.control_estimate, dt) for r in records])
    probabilities = _probe_column(controls @ free[None, :, :], model, n_segments)
    for index, record in enumerate(records):
        if np.array_equal(point, _vector(record.control_estimate)):
            probabilities[index] = np.eye(model.dim)[model.center_level]
    counts = np.array([r.counts for r in records], dtype=float)
    LIKELIHOOD_EVALUATIONS.inc(len(records))
    return float(np.sum(np.log(np.maximum(probabilities, settings.LIKELIHOOD_FLOOR)) * counts))


def log_likelihood_batch(
    candidates: np.ndarray,
    records: Sequence[RoundRecord],
    t: float,
    n_segments: int,
    model: Optional[RabiModel] = None,
) -> np.ndarray:
    """log_likelihood for every row of a (G, l) array"""
    if not records:
        raise InputValidationError("log_likelihood needs at least one round")
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    model = _model(candidates.shape[1], model)
    free = free_unitaries(model, candidates, t / n_segments)
    total = np.zeros(candidates.shape[0])
    for record in records:
        probabilities = outcome_probabilities(candidates, record.control_estimate, t, n_segments, model, free=free)
        total += _log_terms(probabilities, np.asarray(record.counts, dtype=float))
    LIKELIHOOD_EVALUATIONS.inc(len(records) * candidates.shape[0])
    return total


class LikelihoodGrid:
    """
    Running log-likelihood over the coarse search grid.

    Grid points are ordered lexicographically, so the first index among tied
    maxima is the lexicographically smallest candidate. The free unitaries of
    the grid depend only on the configuration and are shared between runs.
    """

    def __init__(self, config: AdaptiveConfig, model: Optional[RabiModel] = None):
        self.config = config
        self.model = model or model_for(config.model, config.levels)
        axes = [np.linspace(lo, hi, config.grid_points) for lo, hi in config.search_box]
        count = config.grid_points ** config.levels
        if count > MAX_GRID_CANDIDATES:
            raise InputValidationError(
                f"{config.grid_points}^{config.levels} = {count} grid candidates is too many; lower grid_points"
            )
        mesh = np.meshgrid(*axes, indexing="ij")
        self.candidates = np.stack([axis.ravel() for axis in mesh], axis=1)
        self.candidates.setflags(write=False)
        self.spacing = np.array(
            [(hi - lo) / max(config.grid_points - 1, 1) for lo, hi in config.search_box]
        )
        key = ("grid", self.model.name, self.model.levels, config.search_box, config.grid_points, config.dt)
        self.free = unitary_cache.get(key, lambda: free_unitaries(self.model, self.candidates, config.dt))
        inside = np.array([config.in_trust_region(candidate) for candidate in self.candidates])
        if not inside.any():
            raise InputValidationError(
                f"No grid candidate lies within {config.trust_region_radius:.4g} of the initial guess; "
                "raise trust_radius or grid_points"
            )
        # candidates outside the trust region never win
        self.values = np.where(inside, 0.0, -np.inf)
        self.rounds = 0

    def add_round(self, record: RoundRecord) -> None:
        probabilities = outcome_probabilities(
            self.candidates,
            record.control_estimate,
            self.config.t,
            self.config.segments,
            self.model,
            free=self.free,
        )
        self.values = self.values + _log_terms(probabilities, np.asarray(record.counts, dtype=float))
        self.rounds += 1
        LIKELIHOOD_EVALUATIONS.inc(len(self.candidates))

    def best(self) -> Tuple[int, float]:
        """Index and value of the lexicographically smallest maximizer"""
        top = float(np.max(self.values))
        tol = settings.TIE_RELATIVE_TOL * max(1.0, abs(top))
        index = int(np.flatnonzero(self.values >= top - tol)[0])
        return index, top

    def rival(self, estimate: Sequence[float], min_distance: float) -> Optional[Tuple[int, float]]:
        """Index and value of the best grid point at least min_distance from the estimate"""
        distance = np.linalg.norm(self.candidates - _vector(estimate)[None, :], axis=1)
        far = np.flatnonzero((distance >= min_distance) & np.isfinite(self.values))
        if far.size == 0:
            return None
        values = self.values[far]
        top = float(np.max(values))
        tol = settings.TIE_RELATIVE_TOL * max(1.0, abs(top))
        index = int(far[np.flatnonzero(values >= top - tol)[0]])
        return index, float(self.values[index])


def _refine(
    start: np.ndarray,
    start_value: float,
    records: Sequence[RoundRecord],
    config: AdaptiveConfig,
    model: RabiModel,
    spacing: np.ndarray,
) -> np.ndarray:
    lower = np.array([lo for lo, _ in config.search_box])
    upper = np.array([hi for _, hi in config.search_box])
    step = np.maximum(spacing / 2.0, settings.REFINE_XTOL)
    simplex = [start]
    for axis in range(start.size):
        vertex = start.copy()
        vertex[axis] += step[axis] if start[axis] + step[axis] <= upper[axis] else -step[axis]
        simplex.append(vertex)

    def objective(x: np.ndarray) -> float:
        point = np.clip(x, lower, upper)
        if not config.in_trust_region(point):
            return np.inf
        return -log_likelihood(point, records, config.t, config.segments, model)

    result = optimize.minimize(
        objective,
        start,
        method="Nelder-Mead",
        bounds=list(zip(lower, upper)),
        options={
            "initial_simplex": np.array(simplex),
            "xatol": settings.REFINE_XTOL,
            "fatol": 1e-12,
            "maxiter": settings.REFINE_MAX_ITER,
        },
    )
    if -result.fun > start_value:
        return np.clip(result.x, lower, upper)
    return start


def mle_update(
    records: Sequence[RoundRecord],
    config: AdaptiveConfig,
    grid: Optional[LikelihoodGrid] = None,
    model: Optional[RabiModel] = None,
) -> Tuple[float, ...]:
    """
    Maximum-likelihood estimate from all rounds collected so far

    Args:
        records: Every round of the trajectory
        config: Trajectory configuration with the search box and grid size
        grid: Accumulated grid already holding the same records, if any
        model: Hamiltonian family matching config.model

    Returns:
        Estimate inside the search box
    """
    if not records:
        raise InputValidationError("mle_update needs at least one round")
    model = model or model_for(config.model, config.levels)
    if grid is None:
        grid = LikelihoodGrid(config, model)
        for record in records:
            grid.add_round(record)
    elif grid.rounds != len(records):
        raise InputValidationError(f"Likelihood grid holds {grid.rounds} rounds, {len(records)} given")

    index, top = grid.best()
    start = np.array(grid.candidates[index], dtype=float)
    # the grid value and the direct evaluation agree up to rounding
    start_value = log_likelihood(start, records, config.t, config.segments, model)
    estimate = _refine(start, max(top, start_value), records, config, model, grid.spacing)
    logger.debug(f"MLE after {len(records)} rounds: grid {start.tolist()} -> {estimate.tolist()}")
    return tuple(float(v) for v in estimate)


def alias_period(t: float) -> float:
    """Offset norm 2π/t at which the controlled evolution returns the probe exactly"""
    return 2.0 * np.pi / t


def strongest_rival(
    records: Sequence[RoundRecord],
    estimate: Sequence[float],
    grid: LikelihoodGrid,
    model: Optional[RabiModel] = None,
) -> Optional[Tuple[Tuple[float, ...], float]]:
    """
    Best likelihood mode at least half an alias period away from the estimate

    Args:
        records: Every round of the trajectory
        estimate: Current maximum-likelihood estimate
        grid: Accumulated grid holding the same records
        model: Hamiltonian family matching the grid

    Returns:
        (refined rival, its log-likelihood), or None when no separate mode exists
    """
    config = grid.config
    model = model or grid.model
    point = _vector(estimate)
    separation = alias_period(config.t) / 2.0
    found = grid.rival(point, separation)
    if found is None:
        return None
    index, value = found
    start = np.array(grid.candidates[index], dtype=float)
    start_value = log_likelihood(start, records, config.t, config.segments, model)
    refined = _refine(start, max(value, start_value), records, config, model, grid.spacing)
    # climbing back into the estimate's basin means the grid point was only a flank
    if np.linalg.norm(refined - point) < separation:
        return None
    rival = tuple(float(v) for v in refined)
    return rival, log_likelihood(rival, records, config.t, config.segments, model)


def discrimination(
    first: Sequence[float],
    second: Sequence[float],
    control: Sequence[float],
    t: float,
    n_segments: int,
    model: RabiModel,
) -> float:
    """Bhattacharyya distance per shot between two candidates' outcome distributions under one control"""
    probabilities = outcome_probabilities(np.stack([_vector(first), _vector(second)]), control, t, n_segments, model)
    overlap = float(np.sum(np.sqrt(probabilities[0] * probabilities[1])))
    return float(-np.log(max(overlap, settings.LIKELIHOOD_FLOOR)))


def _offset_directions(separation: np.ndarray) -> List[np.ndarray]:
    unit = separation / np.linalg.norm(separation)
    directions = []
    for axis in np.eye(separation.size):
        for direction in (axis - (axis @ unit) * unit, axis):
            norm = float(np.linalg.norm(direction))
            if norm > 1e-9:
                directions.extend([direction / norm, -direction / norm])
    return directions


def discriminating_control(
    estimate: Sequence[float],
    rival: Sequence[float],
    config: AdaptiveConfig,
    model: Optional[RabiModel] = None,
) -> Tuple[float, ...]:
    """
    Control that best separates the estimate from a rival mode

    Candidates are the estimate itself and offsets of a quarter and half alias
    period along the coordinate axes and across the estimate-rival separation.
    The first candidate with the largest Bhattacharyya distance wins.
    """
    point = _vector(estimate)
    other = _vector(rival)
    model = _model(point.size, model)
    period = alias_period(config.t)
    options = [point] + [
        point + radius * direction
        for radius in (period / 4.0, period / 2.0)
        for direction in _offset_directions(other - point)
    ]
    scores = [discrimination(point, other, option, config.t, config.segments, model) for option in options]
    return tuple(float(v) for v in options[int(np.argmax(scores))])


def next_control(
    records: Sequence[RoundRecord],
    estimate: Sequence[float],
    grid: LikelihoodGrid,
    model: Optional[RabiModel] = None,
) -> Tuple[Tuple[float, ...], str]:
    """
    Control for the next round and its role

    The estimate is used unless a rival mode half an alias period or more away
    is within ALIAS_LOG_RATIO of it; then the round goes to discriminating_control.
    """
    config = grid.config
    model = model or grid.model
    current = tuple(float(v) for v in _vector(estimate))
    found = strongest_rival(records, current, grid, model)
    if found is None:
        return current, "estimate"
    rival, rival_value = found
    gap = log_likelihood(current, records, config.t, config.segments, model) - rival_value
    if gap >= settings.ALIAS_LOG_RATIO:
        return current, "estimate"
    control = discriminating_control(current, rival, config, model)
    if control == current:
        return current, "estimate"
    logger.debug(f"Rival {rival} within {gap:.2f} of {current}: checking under {control}")
    return control, "alias-check"


def fisher_proxy(
    records: Sequence[RoundRecord],
    point: Sequence[float],
    t: float,
    model: Optional[RabiModel] = None,
) -> float:
    """
    Normalized inverse total variance 1/(M·Tr F⁻¹) supported by a set of rounds

    F sums k times the classical Fisher information of each round at `point`
    under the effective Hamiltonian H(point − Ω̂_r). Simulated trajectories
    evaluate it at the true frequencies. Returns 0 when F is singular.
    """
    if not records:
        return 0.0
    point = _vector(point)
    model = _model(point.size, model)
    povm = Povm.computational(model.dim)
    probe = model.probe()
    total = np.zeros((point.size, point.size))
    shots = 0
    for record in records:
        delta = RabiParameters(omegas=point - _vector(record.control_estimate))
        total += record.shots * cfi_from_povm(delta, t, probe, povm, model=model)
        shots += record.shots
    eigenvalues = np.linalg.eigvalsh(total)
    if eigenvalues[0] <= eigenvalues[-1] / settings.SINGULAR_CONDITION or eigenvalues[-1] <= 0:
        return 0.0
    return 1.0 / (shots * float(np.trace(np.linalg.inv(total))))


def adaptive_run(config: AdaptiveConfig) -> AdaptiveTrace:
    """
    Run the adaptive protocol: measure under the current control, update the
    cumulative MLE, rebuild the control, repeat.

    Round 0 uses initial_guess as its control estimate; later rounds use
    next_control.
    """
    model = model_for(config.model, config.levels)
    rng = RngStream(config.seed)
    grid = LikelihoodGrid(config, model)
    control, role = config.initial_guess, "estimate"
    records: List[RoundRecord] = []
    estimates: List[Tuple[float, ...]] = []
    proxies: List[float] = []

    logger.info(f"Adaptive run: seed {config.seed}, {config.rounds} rounds, initial guess {control}")
    for step in range(1, config.rounds + 1):
        record = run_round(config.omega_true, control, config.t, config.segments, config.shots_per_round, rng, model)
        if role != "estimate":
            record = record.model_copy(update={"role": role})
        records.append(record)
        grid.add_round(record)
        estimate = mle_update(records, config, grid=grid, model=model)
        estimates.append(estimate)
        proxies.append(fisher_proxy(records, config.omega_true, config.t, model))
        ADAPTIVE_ROUNDS.inc()
        logger.debug(f"step {step}: counts {record.counts} under {record.control_estimate} ({role}) -> {estimate}")
        if step < config.rounds:
            control, role = next_control(records, estimate, grid, model)

    checks = [step for step, record in enumerate(records, start=1) if record.role == "alias-check"]
    return AdaptiveTrace(
        config=config,
        rounds=records,
        estimates=estimates,
        norm_inv_variance=proxies,
        metadata=trace_metadata(config, alias_checks=checks),
    )


def trace_metadata(config: AdaptiveConfig, alias_checks: Sequence[int] = ()) -> Dict[str, object]:
    return {
        "estimator": "cumulative maximum likelihood over all rounds, each under its own control",
        "norm_inv_variance": (
            "1/(M·Tr F⁻¹) with F the accumulated classical Fisher information at the true frequencies "
            "under each round's control, M = k·n"
        ),
        "round0_control": "initial_guess",
        "control_rule": (
            f"estimate, unless a mode at least pi/t away is within {settings.ALIAS_LOG_RATIO} in log-likelihood; "
            "then the control offset by pi/(2t) or pi/t that maximizes the Bhattacharyya distance to that mode"
        ),
        "alias_check_steps": list(alias_checks),
        "trust_region": {"center": list(config.initial_guess), "radius": config.trust_region_radius},
        "sign_ambiguity": "estimates are resolved inside the search box; ties go to the lexicographically smallest",
        "refinement": f"Nelder-Mead, xatol {settings.REFINE_XTOL}, max {settings.REFINE_MAX_ITER} iterations",
        "likelihood_floor": settings.LIKELIHOOD_FLOOR,
        "config": config.model_dump(mode="json"),
    }


def run_seeds(config: AdaptiveConfig, seeds: Sequence[int], workers: int = 1) -> List[AdaptiveTrace]:
    """One trajectory per seed, fanned out over threads and returned in seed order"""
    if workers < 1:
        raise InputValidationError(f"workers must be at least 1, got {workers}")
    configs = [AdaptiveConfig(**{**config.model_dump(), "seed": seed}) for seed in seeds]
    if workers == 1 or len(configs) <= 1:
        return [adaptive_run(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(adaptive_run, configs))


def multilevel_controlled_qfim(l: int, t: float) -> QfimResult:
    """QFIM of the star model at ΔΩ = 0 with probe |0⟩; t²·I"""
    if l < 1:
        raise InputValidationError(f"l must be at least 1, got {l}")
    model = StarModel(l)
    zero = RabiParameters(omegas=(0.0,) * l)
    derivs = state_derivatives(zero, t, model.probe(), model=model, method="spectral")
    return qfim_pure(derivs)


def robustness_curve(omega_plus_offsets: Sequence[float], t: float, m: int) -> List[Tuple[float, float]]:
    """(ΔΩ₊, 1/controlled_bound) pairs; 0 where the bound diverges"""
    curve = []
    for offset in omega_plus_offsets:
        offset = float(offset)
        if offset < 0:
            raise InputValidationError(f"Offsets must be non-negative, got {offset}")
        bound = controlled_bound(m, t, (offset,))
        curve.append((offset, 0.0 if np.isinf(bound) else 1.0 / bound))
    return curve
