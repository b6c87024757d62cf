import logging

import click
import numpy as np

from app.cli.runtime import instrumented
from app.core.errors import InputValidationError, SingularQfimError
from app.schemas.quantum import QuantumState
from app.schemas.rabi import RabiParameters
from app.schemas.run import RunConfig
from app.services.closed_form import optimal_probe_state
from app.services.experiments import experiment_service

logger = logging.getLogger(__name__)


def parse_probe(value: str, omega: RabiParameters, t: float) -> QuantumState:
    """
    Resolve a --probe value

    Args:
        value: optimal, basis:<i> or file:<path>
        omega: Parameter point, used by the optimal probe
        t: Evolution time, used by the optimal probe

    Returns:
        Normalized probe state
    """
    if value == "optimal":
        return optimal_probe_state(omega, t)
    kind, _, arg = value.partition(":")
    if kind == "basis":
        try:
            index = int(arg)
        except ValueError:
            raise InputValidationError(f"--probe basis:<i> needs an integer index, got {arg!r}")
        if not 0 <= index < omega.count + 1:
            raise InputValidationError(f"basis index {index} outside [0, {omega.count + 1})")
        return QuantumState.basis(omega.count + 1, index)
    if kind == "file":
        try:
            amplitudes = np.loadtxt(arg, dtype=complex).reshape(-1)
        except (OSError, ValueError) as e:
            raise InputValidationError(f"cannot read probe amplitudes from {arg}: {e}")
        if amplitudes.size != omega.count + 1:
            raise InputValidationError(f"probe file holds {amplitudes.size} amplitudes, expected {omega.count + 1}")
        return QuantumState.from_vector(amplitudes)
    raise InputValidationError(f"unknown probe {value!r}", resolution="Use optimal, basis:<i> or file:<path>")


@click.command()
@click.option("--omega1", type=float, required=True, help="Rabi frequency Ω₁")
@click.option("--omega2", type=float, required=True, help="Rabi frequency Ω₂")
@click.option("--time", "t", type=float, required=True, help="Evolution time t")
@click.option("--probe", default="optimal", show_default=True, help="optimal | basis:<i> | file:<path>")
@instrumented("qfim")
def qfim(omega1: float, omega2: float, t: float, probe: str) -> int:
    """QFIM of the three-level system, its diagnostics and Tr(J⁻¹)"""
    RunConfig(command="qfim", flags={"time": t})
    omega = RabiParameters.of(omega1, omega2)
    state = parse_probe(probe, omega, t)
    rows = experiment_service.qfim_report(omega, t, state)
    click.echo(experiment_service.render_rows(rows), nl=False)
    if dict(rows)["singular"]:
        raise SingularQfimError(f"QFIM is singular at Ω₊t = {omega.omega_plus * t!r}; Tr(J⁻¹) is undefined")
    return 0
