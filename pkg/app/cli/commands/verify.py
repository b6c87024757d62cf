import click

from app.cli.runtime import instrumented
from app.core.config import settings
from app.core.errors import VerificationFailure
from app.services.verification import SUITES, run_verification


@click.command()
@click.option("--quick", is_flag=True, help="Reduced sample counts")
@click.option("--seed", type=int, default=None, help="Root seed of the suites")
@click.option("--suite", "suites", multiple=True, type=click.Choice(list(SUITES)), help="Run only these suites")
@instrumented("verify")
def verify(quick: bool, seed, suites) -> int:
    """Run the oracle suites; exit 3 when any fails"""
    results = run_verification(quick=quick, seed=settings.resolve_seed(seed), suites=suites or None)
    for result in results:
        click.echo(result.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationFailure(f"failing suites: {', '.join(failed)}")
    return 0
