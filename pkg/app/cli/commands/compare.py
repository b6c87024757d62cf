import math

import click

from app.cli.runtime import instrumented, table_options
from app.schemas.run import RunConfig
from app.services.experiments import experiment_service


@click.command()
@click.option("--omega-plus", type=float, default=0.1, show_default=True, help="Ω₊")
@click.option("--m", type=int, default=1, show_default=True, help="Experiments per parameter")
@click.option("--xmax", type=float, default=2 * math.pi, show_default=True, help="Largest Ω₊t")
@click.option("--steps", type=int, default=400, show_default=True, help="Grid points on (0, xmax]")
@table_options
@instrumented("compare")
def compare(omega_plus: float, m: int, xmax: float, steps: int, output, output_format: str) -> int:
    """Joint against separate estimation bounds over Ω₊t"""
    RunConfig(
        command="compare",
        flags={"omega_plus": omega_plus, "m": m, "xmax": xmax, "steps": steps},
        output=output,
        output_format=output_format,
    )
    df = experiment_service.compare_table(omega_plus, m, xmax, steps)
    experiment_service.export(df, output, output_format)
    summary = experiment_service.compare_summary(omega_plus, m)
    click.echo(experiment_service.render_rows(summary.items()), nl=False, err=output is None)
    return 0
