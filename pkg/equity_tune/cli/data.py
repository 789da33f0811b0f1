"""equity-tune CLI gen-data command."""

import click

from ..cli.utils import exit_on_error, resolve, run_options
from ..pipeline import generate_data, write_data


@click.command(
    "gen-data",
    help="Generate the synthetic dataset (or ingest data.input_path), "
    "split it and write the dataset and manifest files.",
)
@run_options
@exit_on_error
def gen_data(config_path, seed, out, overrides):
    """CLI command for generating a dataset."""
    config = resolve(config_path, seed, out, overrides)
    dataset, manifest = generate_data(config)
    write_data(config, dataset, manifest)
    click.echo(
        f"Wrote {manifest.n_samples} samples to {config.dataset_file} "
        f"and the manifest to {config.manifest_file}"
    )
