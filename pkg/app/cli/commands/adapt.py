import logging
from typing import List, Optional

import click

from app.cli.config_file import load_adaptive_config
from app.cli.runtime import instrumented, table_options
from app.schemas.run import RunConfig
from app.services.adaptive_loop import run_seeds
from app.services.experiments import experiment_service

logger = logging.getLogger(__name__)


def parse_seeds(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        seeds = [int(part, 0) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}", param_hint="--seeds")
    if not seeds:
        raise click.BadParameter("no seeds given", param_hint="--seeds")
    return seeds


@click.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True, help="key = value file")
@click.option("--seed", type=int, default=None, help="Overrides the config-file seed")
@click.option("--seeds", default=None, help="Comma-separated seeds, one trajectory each")
@click.option("--workers", type=int, default=1, show_default=True, help="Threads for multiple seeds")
@click.option("--summary", type=click.Path(dir_okay=False), default=None, help="Per-step seed medians as CSV")
@table_options
@instrumented("adapt")
def adapt(config_path: str, seed, seeds, workers: int, summary, output, output_format: str) -> int:
    """
    Simulate the adaptive control protocol from a configuration file.

    Keys: omega<i>_true, initial_guess_<i>, time, shots_per_round, rounds,
    seed, box_lo, box_hi, grid_points, segments, model. Estimates are only
    determined up to the sign symmetry of the likelihood; the search box and
    the lexicographic tie-break resolve it.
    """
    RunConfig(
        command="adapt",
        flags={"workers": workers},
        config_path=config_path,
        output=output,
        output_format=output_format,
        seed=seed,
    )
    seed_list = parse_seeds(seeds)
    config = load_adaptive_config(config_path, seed_flag=seed)
    traces = run_seeds(config, seed_list or [config.seed], workers=workers)

    df = experiment_service.adaptive_table(traces, levels=config.levels)
    experiment_service.export(df, output, output_format)
    metadata = dict(traces[0].metadata)
    metadata["seeds"] = [trace.seed for trace in traces]
    metadata["alias_check_steps"] = {str(trace.seed): trace.metadata["alias_check_steps"] for trace in traces}
    experiment_service.write_metadata(metadata, output)
    if summary is not None and config.rounds > 0:
        experiment_service.export_csv(experiment_service.ensemble_summary(traces), summary)
    return 0
