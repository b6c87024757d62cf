import click

from app.cli.runtime import instrumented, table_options
from app.schemas.run import RunConfig
from app.services.experiments import experiment_service


@click.command()
@click.option("--time", "t", type=float, default=5.0, show_default=True, help="Evolution time t")
@click.option("--m", type=int, default=1, show_default=True)
@click.option("--offset-max", type=float, default=1.0, show_default=True, help="Largest ‖Ω − Ω̂‖")
@click.option("--steps", type=int, default=100, show_default=True)
@table_options
@instrumented("robustness")
def robustness(t: float, m: int, offset_max: float, steps: int, output, output_format: str) -> int:
    """Inverse total variance of the controlled scheme against the control error"""
    RunConfig(
        command="robustness",
        flags={"time": t, "m": m, "offset_max": offset_max, "steps": steps},
        output=output,
        output_format=output_format,
    )
    experiment_service.export(experiment_service.robustness_table(t, m, offset_max, steps), output, output_format)
    return 0
