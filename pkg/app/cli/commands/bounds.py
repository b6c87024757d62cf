import click

from app.cli.runtime import instrumented
from app.schemas.run import RunConfig
from app.services.experiments import experiment_service


@click.command()
@click.option("--m", type=int, default=1, show_default=True)
@click.option("--time", "t", type=float, required=True)
@click.option("--omega-plus", type=float, required=True)
@click.option("--delta-omega", type=float, default=0.0, show_default=True, help="Control error ‖Ω − Ω̂‖")
@instrumented("bounds")
def bounds(m: int, t: float, omega_plus: float, delta_omega: float) -> int:
    """Joint, separate and controlled bounds at one point"""
    RunConfig(command="bounds", flags={"m": m, "time": t, "omega_plus": omega_plus})
    click.echo(experiment_service.render_rows(experiment_service.bounds_report(m, t, omega_plus, delta_omega)), nl=False)
    return 0
