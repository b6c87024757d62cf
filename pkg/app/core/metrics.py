"""
Prometheus metrics for the command-line runs
"""
import logging
from pathlib import Path

import prometheus_client
from prometheus_client import Counter, Histogram, generate_latest

from app.core.config import settings

logger = logging.getLogger(__name__)

# Private registry so repeated imports in tests never register duplicates
CUSTOM_REGISTRY = prometheus_client.CollectorRegistry(auto_describe=True)

COMMAND_COUNTER = Counter('rabiest_commands', 'Commands executed', ['command'], registry=CUSTOM_REGISTRY)
COMMAND_LATENCY = Histogram('rabiest_command_latency_seconds', 'Command wall time in seconds', ['command'], registry=CUSTOM_REGISTRY)
ERROR_COUNTER = Counter('rabiest_errors', 'Errors by code', ['error_code'], registry=CUSTOM_REGISTRY)
LIKELIHOOD_EVALUATIONS = Counter('rabiest_likelihood_evaluations', 'Candidate-record likelihood evaluations', registry=CUSTOM_REGISTRY)
ADAPTIVE_ROUNDS = Counter('rabiest_adaptive_rounds', 'Simulated measurement rounds', registry=CUSTOM_REGISTRY)
VERIFY_CHECKS = Counter('rabiest_verify_checks', 'Verification suites by outcome', ['suite', 'outcome'], registry=CUSTOM_REGISTRY)


def write_metrics(path: str) -> bool:
    """
    Write the registry in the text exposition format

    Args:
        path: Destination file

    Returns:
        Whether the file was written
    """
    if not settings.ENABLE_METRICS:
        logger.info("Metrics disabled, skipping metrics file")
        return False
    try:
        Path(path).write_bytes(generate_latest(CUSTOM_REGISTRY))
        logger.info(f"Metrics written to {path}")
        return True
    except OSError as e:
        logger.error(f"Error writing metrics to {path}: {str(e)}")
        return False
