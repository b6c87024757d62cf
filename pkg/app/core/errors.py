"""
Error handling module for the Rabi estimation toolkit
"""
import logging
import traceback
from typing import Optional

import click
from pydantic import ValidationError

logger = logging.getLogger(__name__)


class RabiEstError(Exception):
    """Base class carrying an error code, a resolution hint and a process exit code"""

    code = "RABI_500"
    exit_code = 1
    resolution = "Contact the maintainers if the problem persists"

    def __init__(self, message: str, resolution: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if resolution is not None:
            self.resolution = resolution


class InputValidationError(RabiEstError, ValueError):
    code = "RABI_001"
    exit_code = 1
    resolution = "Check the numeric inputs against the documented preconditions"


class RankDeficiencyError(InputValidationError):
    """Raised when a vector lies in the span of the ones before it"""

    def __init__(self, index: int, message: Optional[str] = None):
        self.index = index
        super().__init__(message or f"Vector {index} is linearly dependent on the preceding vectors")


class ConfigError(InputValidationError):
    code = "RABI_004"
    resolution = "Fix the configuration file; see `adapt --help` for the accepted keys"


class DegenerateSpectrumError(RabiEstError):
    code = "RABI_002"
    exit_code = 2
    resolution = "Use the numeric eigendecomposition for degenerate points"


class SingularParameterizationError(RabiEstError):
    code = "RABI_002"
    exit_code = 2
    resolution = "The mixing-angle parameterization needs Ω₊ > 0; use spectral derivatives at ΔΩ = 0"


class SingularTimeError(RabiEstError):
    code = "RABI_003"
    exit_code = 2
    resolution = "Ω₊t is a multiple of 2π; use qfim_singular_form or pick another evolution time"


class InfiniteBoundError(RabiEstError):
    code = "RABI_003"
    exit_code = 2
    resolution = "The bound diverges at singular times Ω₊t = 2nπ"


class SingularQfimError(RabiEstError):
    code = "RABI_003"
    exit_code = 2
    resolution = "The QFIM is rank deficient; joint estimation is impossible for this probe and time"


class VerificationFailure(RabiEstError):
    code = "RABI_005"
    exit_code = 3
    resolution = "Inspect the failing suites listed above"


class IdentityViolationError(RabiEstError):
    code = "RABI_006"
    exit_code = 3
    resolution = "An analytic identity failed numerically; report the input that triggered it"


class CLIErrorHandler:
    """
    Maps exceptions raised by commands to standardized messages and exit codes
    """

    ERROR_CODES = {
        "RABI_001": "Invalid input",
        "RABI_002": "Degenerate spectrum or singular parameterization",
        "RABI_003": "Mathematically singular request",
        "RABI_004": "Invalid configuration",
        "RABI_005": "Verification failure",
        "RABI_006": "Analytic identity violated",
        "RABI_500": "Internal error",
    }

    def handle_exception(self, command: str, exc: Exception) -> int:
        """
        Report an exception on stderr and return the process exit code

        Args:
            command: Name of the command that failed
            exc: The raised exception

        Returns:
            Exit code following the 0/1/2/3 contract
        """
        error_code = "RABI_500"
        exit_code = 1
        message = str(exc) or self.ERROR_CODES[error_code]
        resolution = RabiEstError.resolution

        if isinstance(exc, RabiEstError):
            error_code = exc.code
            exit_code = exc.exit_code
            message = exc.message
            resolution = exc.resolution
            logger.warning(f"{command}: {type(exc).__name__}: {message}")
        elif isinstance(exc, click.ClickException):
            # Usage text goes out the way click prints it
            error_code = "RABI_001"
            exc.show()
            message = exc.format_message()
            resolution = "Run with --help for the accepted options"
        elif isinstance(exc, ValidationError):
            error_code = "RABI_001"
            message = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'input'}: {err['msg']}" for err in exc.errors()
            )
            resolution = "Check the numeric inputs against the documented preconditions"
        else:
            logger.error(f"Unhandled exception in command: {command}")
            logger.error(traceback.format_exc())

        from app.core.metrics import ERROR_COUNTER
        ERROR_COUNTER.labels(error_code=error_code).inc()

        click.echo(f"error: {error_code}", err=True)
        click.echo(f"message: {message}", err=True)
        click.echo(f"resolution: {resolution}", err=True)
        return exit_code
