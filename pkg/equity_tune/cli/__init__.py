"""equity-tune CLI."""

import logging

import click

from .._version import __version__
from ..cli.checks import grad_check, mi_oracle
from ..cli.data import gen_data
from ..cli.evaluate import evaluate, match_pairs, report
from ..cli.train import probe, sweep, train

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


def build_cli():
    """Create the equity-tune command group."""
    commands = {
        "gen-data": gen_data,
        "train": train,
        "eval": evaluate,
        "report": report,
        "match-pairs": match_pairs,
        "grad-check": grad_check,
        "mi-oracle": mi_oracle,
        "probe": probe,
        "sweep": sweep,
    }

    @click.group(commands=commands)
    @click.version_option(version=__version__)
    @click.option(
        "--log-level",
        "--log_level",
        help="Set logging level for the python root logger",
        type=click.Choice(LOG_LEVELS, case_sensitive=False),
        default="INFO",
    )
    def group(log_level):
        """CLI tools for fairness-aware adapter finetuning and evaluation."""
        logging.basicConfig(
            level=log_level.upper(),
            format="%(asctime)s: %(levelname)s: %(message)s",
        )

    return group


def cli(prog_name=None):
    """Run the equity-tune CLI."""
    build_cli()(prog_name=prog_name)


if __name__ == "__main__":
    cli()
