import logging

import click

from app.cli.commands import adapt, bounds, compare, multilevel, qfim, robustness, verify
from app.cli.runtime import STATE
from app.core.config import settings

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default=settings.LOG_LEVEL.upper(),
    show_default=True,
    help="Log records go to stderr",
)
@click.option("--metrics-file", type=click.Path(dir_okay=False), default=None, help="Write prometheus metrics here")
@click.version_option(settings.VERSION, prog_name=settings.PROJECT_NAME)
def cli(log_level: str, metrics_file) -> None:
    """Joint estimation of Rabi frequencies: QFIM, bounds and adaptive control"""
    logging.getLogger().setLevel(log_level.upper())
    STATE["metrics_file"] = metrics_file


# Include all command modules
cli.add_command(qfim.qfim)
cli.add_command(compare.compare)
cli.add_command(robustness.robustness)
cli.add_command(adapt.adapt)
cli.add_command(multilevel.multilevel)
cli.add_command(verify.verify)
cli.add_command(bounds.bounds)
