import click

from app.cli.runtime import instrumented
from app.schemas.run import RunConfig
from app.services.experiments import experiment_service


@click.command()
@click.option("--levels", "l", type=int, required=True, help="Number of couplings l")
@click.option("--time", "t", type=float, default=5.0, show_default=True)
@click.option("--m", type=int, default=1, show_default=True)
@instrumented("multilevel")
def multilevel(l: int, t: float, m: int) -> int:
    """Controlled QFIM of the star model and the l-fold gain over separate estimation"""
    RunConfig(command="multilevel", flags={"levels": l, "time": t, "m": m})
    click.echo(experiment_service.render_rows(experiment_service.multilevel_report(l, t, m)), nl=False)
    return 0
