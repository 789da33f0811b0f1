"""Utility functions used by the CLI."""

import functools
import logging
import os
import sys

import click
import yaml

from ..config import load_config
from ..util.exceptions import EquityTuneError


def is_valid_file(ctx, param, value):
    """Check if the parameter provided via click is an existing file."""
    if value is None:
        return value
    if not os.path.isfile(value) or not os.path.exists(value):
        raise click.BadParameter(f"Invalid file path to {value}")
    return value


class OverrideType(click.ParamType):
    """A `key.sub=value` override whose value is parsed as YAML."""

    name = "override"

    def convert(self, value, param, ctx):
        """Split on the first `=` and parse the right-hand side."""
        if isinstance(value, tuple):
            return value
        key, sep, raw = value.partition("=")
        if not sep or not key.strip():
            self.fail(f"Expected key=value, got {value!r}", param, ctx)
        try:
            return key.strip(), yaml.safe_load(raw)
        except yaml.YAMLError as e:
            self.fail(f"Invalid value in override {value!r}: {e}", param, ctx)


def exit_on_error(command):
    """Print library errors and exit with their family's exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except EquityTuneError as e:
            logging.debug("Command failed", exc_info=True)
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)

    return wrapper


config_option = click.option(
    "--config",
    "-c",
    "config_path",
    help="YAML config file; defaults to ./equity_tune.yaml if present.",
    type=click.Path(dir_okay=False),
    default=None,
    callback=is_valid_file,
)

seed_option = click.option(
    "--seed",
    help="Seed for every random draw; applied after all overrides.",
    type=int,
    default=None,
)

out_option = click.option(
    "--out",
    "-o",
    help="Output directory; shadows paths.out.",
    type=click.Path(file_okay=False),
    default=None,
)

override_option = click.option(
    "--override",
    "overrides",
    help="Override a config value, e.g. train.weights.lambda_dim=0.5. Repeatable.",
    type=OverrideType(),
    multiple=True,
)


def run_options(command):
    """Add --config, --seed, --out and --override to a command."""
    for option in reversed([config_option, seed_option, out_option, override_option]):
        command = option(command)
    return command


def resolve(config_path, seed, out, overrides):
    """Load the run config from the common options."""
    config = load_config(config_path, overrides, seed=seed, out=out)
    logging.debug(f"Resolved config: {config.to_dict()}")
    return config


def parse_weight_points(ctx, param, value):
    """Parse `lambda_dac,lambda_dim,lambda_lm` triples into LossWeights fields."""
    points = []
    for text in value:
        parts = text.split(",")
        try:
            numbers = [float(p) for p in parts]
        except ValueError:
            numbers = []
        if len(numbers) != 3:
            raise click.BadParameter(
                f"Expected lambda_dac,lambda_dim,lambda_lm, got {text!r}"
            )
        points.append(dict(zip(("lambda_dac", "lambda_dim", "lambda_lm"), numbers)))
    return points


def parse_attribute_points(ctx, param, value):
    """Parse `race=0.2,age=0.6,gender=0.1` into per-attribute weights."""
    points = []
    for text in value:
        weights = {}
        for part in text.split(","):
            name, sep, number = part.partition("=")
            try:
                weights[name.strip()] = float(number)
            except ValueError:
                sep = ""
            if not sep or not name.strip():
                raise click.BadParameter(
                    f"Expected attribute=weight pairs, got {text!r}"
                )
        points.append({"attribute_weights": weights})
    return points
