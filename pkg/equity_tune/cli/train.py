"""equity-tune CLI train, probe and sweep commands."""

import attr
import click

from ..cli.utils import (
    exit_on_error,
    is_valid_file,
    parse_attribute_points,
    parse_weight_points,
    resolve,
    run_options,
)
from ..model.checkpoint import load_checkpoint
from ..pipeline import (
    fairness_reports,
    load_splits,
    predict,
    provenance,
    save_training,
    train_model,
)
from ..trainer.probe import probe_model
from ..util.common import write_json, write_jsonl
from ..util.exceptions import ConfigError, NumericError


@click.command(
    help="Train the projector, adapters and attribute heads on the train split."
)
@run_options
@exit_on_error
def train(config_path, seed, out, overrides):
    """CLI command for training."""
    config = resolve(config_path, seed, out, overrides)
    _, train_split, _ = load_splits(config)
    result = train_model(config, train_split)
    save_training(config, result)

    steps = result.log.steps
    diverged = [s for s in steps if s["diverged"]]
    click.echo(
        f"Trained {len(steps)} steps; "
        f"wrote {config.checkpoint_file} and {config.train_log_file}"
    )
    if diverged:
        raise NumericError(
            f"{len(diverged)} of {len(steps)} steps diverged; see the training log"
        )


@click.command(help="Measure attribute leakage of a checkpoint with held-out probes.")
@run_options
@click.option(
    "--checkpoint",
    help="Checkpoint to probe; defaults to the configured checkpoint path.",
    type=click.Path(dir_okay=False),
    default=None,
    callback=is_valid_file,
)
@click.option("--epochs", help="Probe training epochs.", type=int, default=200)
@exit_on_error
def probe(config_path, seed, out, overrides, checkpoint, epochs):
    """CLI command for probing pooled states."""
    config = resolve(config_path, seed, out, overrides)
    state = load_checkpoint(checkpoint or config.checkpoint_file).state
    _, train_split, test_split = load_splits(config)
    results = probe_model(
        state, train_split, test_split, epochs=epochs, seed=config.seed
    )

    probes = {k: attr.asdict(v) for k, v in results.items()}
    document = dict(provenance(config), probes=probes)
    path = config.artifact("probe.json")
    write_json(path, document)
    for result in results.values():
        click.echo(
            f"{result.attribute:12} accuracy {result.accuracy:.3f} "
            f"chance {result.chance:.3f} majority {result.majority_rate:.3f}"
        )
    click.echo(f"Wrote {path}")


@click.command(help="Train, evaluate and report over a grid of loss weights.")
@run_options
@click.option(
    "--point",
    "points",
    help="Grid point lambda_dac,lambda_dim,lambda_lm, e.g. 0.1,1.0,1.0. Repeatable.",
    multiple=True,
    callback=parse_weight_points,
)
@click.option(
    "--attribute-point",
    "attribute_points",
    help="Per-attribute weights, e.g. race=0.2,age=0.6,gender=0.1. Repeatable.",
    multiple=True,
    callback=parse_attribute_points,
)
@click.option(
    "--n-resamples",
    help="Bootstrap resamples per report; 0 skips intervals.",
    type=int,
    default=0,
)
@exit_on_error
def sweep(config_path, seed, out, overrides, points, attribute_points, n_resamples):
    """CLI command for a loss-weight sensitivity sweep."""
    config = resolve(config_path, seed, out, overrides)
    grid = list(points) + list(attribute_points)
    if not grid:
        raise ConfigError("Give at least one --point or --attribute-point")
    manifest, train_split, test_split = load_splits(config)

    rows = [dict(type="header", **provenance(config))]
    for point in grid:
        try:
            weights = attr.evolve(config.train.weights, **point)
            point_config = attr.evolve(
                config, train=attr.evolve(config.train, weights=weights)
            )
        except ValueError as e:
            raise ConfigError(f"Invalid grid point {point}: {e}")
        result = train_model(point_config, train_split)
        pairs = predict(
            result.state,
            test_split,
            config.eval.max_new,
            config.eval.parallelism,
            config.eval.chunk_size,
        )
        document = fairness_reports(
            point_config, pairs, manifest, n_resamples=n_resamples
        )
        rows.append(
            {
                "type": "point",
                "point": point,
                "reports": [
                    {k: r[k] for k in ("metric", "attribute", "m_all", "gap", "es")}
                    for r in document["reports"]
                ],
            }
        )
        click.echo(f"Finished grid point {point}")

    path = config.artifact("sweep.jsonl")
    write_jsonl(path, rows)
    click.echo(f"Wrote {len(grid)} grid points to {path}")
