"""
Process-wide state shared by the command group and the entry point
"""
import functools
import logging
from typing import Any, Callable, Dict, Optional

import click

from app.core.metrics import COMMAND_COUNTER, COMMAND_LATENCY, write_metrics

logger = logging.getLogger(__name__)

STATE: Dict[str, Any] = {"command": None, "metrics_file": None}


def reset_state() -> None:
    STATE["command"] = None
    STATE["metrics_file"] = None


def current_command() -> str:
    return STATE["command"] or "rabiest"


def instrumented(name: str) -> Callable:
    """Count the command and time it on the metrics registry"""

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            STATE["command"] = name
            COMMAND_COUNTER.labels(command=name).inc()
            with COMMAND_LATENCY.labels(command=name).time():
                return func(*args, **kwargs)

        return wrapper

    return decorator


def table_options(func: Callable) -> Callable:
    """--output and --format for commands producing a table"""
    func = click.option(
        "--format",
        "output_format",
        type=click.Choice(["csv", "parquet"]),
        default="csv",
        show_default=True,
        help="Table format; parquet needs --output",
    )(func)
    return click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout")(func)


def flush_metrics() -> Optional[bool]:
    path = STATE.get("metrics_file")
    if path is None:
        return None
    return write_metrics(path)
