# -*- coding: utf-8 -*-
"""
Entry point for the Rabi estimation toolkit

    python main.py compare --omega-plus 0.1 --m 1
    python main.py verify --quick
"""
import logging
import sys
from typing import List, Optional

import click

from app.cli.cli import cli
from app.cli.runtime import current_command, flush_metrics, reset_state
from app.core.config import settings
from app.core.errors import CLIErrorHandler

# Configure logging; stdout carries results only
logging.basicConfig(
    level=settings.LOG_LEVEL.upper(),
    format=settings.LOG_FORMAT,
    stream=sys.stderr,
)

logger = logging.getLogger(__name__)

error_handler = CLIErrorHandler()


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and return its exit code

    Args:
        argv: Arguments without the program name, sys.argv[1:] by default

    Returns:
        0 success, 1 invalid input or configuration, 2 singular request, 3 verification failure
    """
    reset_state()
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = cli.main(args=args, prog_name="rabiest", standalone_mode=False)
        return result if isinstance(result, int) else 0
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except Exception as exc:
        return error_handler.handle_exception(current_command(), exc)
    finally:
        flush_metrics()


if __name__ == "__main__":
    sys.exit(run())
