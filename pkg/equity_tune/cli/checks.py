"""equity-tune CLI grad-check and mi-oracle commands."""

import click

from ..cli.utils import exit_on_error, resolve, run_options
from ..metrics.render import CHECKS_TEMPLATE, render
from ..pipeline import provenance
from ..util.common import write_json
from ..util.exceptions import NumericError
from ..verify import GRAD_TOLERANCE, club_oracle_suite, gradient_suite


def _finish(config, name, title, columns, rows):
    document = dict(provenance(config), rows=rows, passed=all(r["ok"] for r in rows))
    path = config.artifact(f"{name}.json")
    write_json(path, document)
    markdown = render(CHECKS_TEMPLATE, title=title, columns=columns, rows=rows)
    config.artifact(f"{name}.md").write_text(markdown)
    click.echo(markdown)
    failed = [r for r in rows if not r["ok"]]
    if failed:
        raise NumericError(f"{len(failed)} of {len(rows)} checks failed; see {path}")
    click.echo(f"All {len(rows)} checks passed; wrote {path}")


@click.command(
    "grad-check",
    help="Compare analytic and finite-difference gradients of every loss term "
    "on seeded toy problems and verify the stop-gradient contracts.",
)
@run_options
@click.option(
    "--n-configs", help="Number of seeded toy problems.", type=int, default=10
)
@click.option(
    "--tolerance",
    help="Maximum relative error per term.",
    type=float,
    default=GRAD_TOLERANCE,
)
@click.option(
    "--coordinates",
    help="Coordinates checked per parameter tensor.",
    type=int,
    default=3,
)
@exit_on_error
def grad_check(config_path, seed, out, overrides, n_configs, tolerance, coordinates):
    """CLI command for gradient verification."""
    config = resolve(config_path, seed, out, overrides)
    rows = gradient_suite(
        range(n_configs), tolerance=tolerance, coordinates=coordinates
    )
    _finish(
        config,
        "grad_check",
        "Gradient checks",
        ["seed", "term", "max_relative_error", "max_abs_gradient", "ok"],
        rows,
    )


@click.command(
    "mi-oracle",
    help="Compare the exact CLUB bound with exact mutual information on random joints.",
)
@run_options
@click.option("--n-joints", help="Number of random joints.", type=int, default=100)
@exit_on_error
def mi_oracle(config_path, seed, out, overrides, n_joints):
    """CLI command for the CLUB bound oracle."""
    config = resolve(config_path, seed, out, overrides)
    rows = club_oracle_suite(n_joints=n_joints, seed=config.seed)
    _finish(
        config,
        "mi_oracle",
        "CLUB bound vs exact mutual information",
        ["joint", "shape", "bound", "mutual_information", "slack", "ok"],
        rows,
    )
