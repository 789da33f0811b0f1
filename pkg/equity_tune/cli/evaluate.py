"""equity-tune CLI eval, report and match-pairs commands."""

import click
import yaml

from ..cli.utils import exit_on_error, is_valid_file, resolve, run_options
from ..data.records import DatasetManifest
from ..metrics.analysis import counterfactual_gap
from ..metrics.fairness_report import es_metric
from ..metrics.pairs import read_predictions, score_pairs, write_predictions
from ..metrics.render import CHECKS_TEMPLATE, COUNTERFACTUAL_TEMPLATE, render
from ..model.checkpoint import load_checkpoint
from ..pipeline import (
    fairness_reports,
    load_splits,
    predict,
    provenance,
    render_report,
    report_attributes,
    report_metrics,
)
from ..util.common import write_json
from ..util.exceptions import DataError

checkpoint_option = click.option(
    "--checkpoint",
    help="Checkpoint to evaluate; defaults to the configured checkpoint path.",
    type=click.Path(dir_okay=False),
    default=None,
    callback=is_valid_file,
)

predictions_option = click.option(
    "--predictions",
    help="Predictions file; defaults to predictions.jsonl in the output directory.",
    type=click.Path(dir_okay=False),
    default=None,
    callback=is_valid_file,
)


def _manifest_if_present(config):
    if config.manifest_file.is_file():
        return DatasetManifest.read(config.manifest_file)
    return None


def _write_outputs(config, name, document, markdown):
    json_path = config.artifact(f"{name}.json")
    write_json(json_path, document)
    config.artifact(f"{name}.md").write_text(markdown)
    click.echo(markdown)
    click.echo(f"Wrote {json_path} and {config.artifact(f'{name}.md')}")


def es_summary(path) -> list:
    """ES values for hand-entered (m_all, gap) rows of a YAML list."""
    with open(path, "r") as yaml_stream:
        try:
            entries = yaml.safe_load(yaml_stream)
        except yaml.YAMLError as e:
            raise DataError(f"Invalid YAML in {path}: {e}")
    if not isinstance(entries, list) or not entries:
        raise DataError(
            f"{path} must hold a non-empty list of {{name, m_all, gap}} rows"
        )
    rows = []
    for index, entry in enumerate(entries):
        try:
            m_all, gap = float(entry["m_all"]), float(entry["gap"])
            es = es_metric(m_all, gap)
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(
                f"{path}: row {index} is not a valid (m_all, gap) pair ({e})"
            )
        name = str(entry.get("name", index))
        rows.append({"name": name, "m_all": m_all, "gap": gap, "es": es})
    return rows


@click.command(
    "eval", help="Generate greedily for every test sample and write predictions."
)
@run_options
@checkpoint_option
@click.option(
    "--parallelism",
    "-P",
    help="Number of worker threads; shadows eval.parallelism.",
    type=int,
    default=None,
)
@exit_on_error
def evaluate(config_path, seed, out, overrides, checkpoint, parallelism):
    """CLI command for evaluating a checkpoint."""
    if parallelism is not None:
        overrides = tuple(overrides) + (("eval.parallelism", parallelism),)
    config = resolve(config_path, seed, out, overrides)
    state = load_checkpoint(checkpoint or config.checkpoint_file).state
    _, _, test_split = load_splits(config)
    pairs = predict(
        state,
        test_split,
        config.eval.max_new,
        parallelism=config.eval.parallelism,
        chunk_size=config.eval.chunk_size,
    )
    write_predictions(config.predictions_file, pairs)
    click.echo(f"Wrote {len(pairs)} predictions to {config.predictions_file}")


@click.command(
    help="Per-group scores, fairness gaps, ES metrics and bootstrap intervals."
)
@run_options
@predictions_option
@click.option(
    "--summary",
    help="YAML list of {name, m_all, gap} rows (percent) to convert into ES values.",
    type=click.Path(dir_okay=False),
    default=None,
    callback=is_valid_file,
)
@exit_on_error
def report(config_path, seed, out, overrides, predictions, summary):
    """CLI command for fairness reports."""
    config = resolve(config_path, seed, out, overrides)
    if summary is not None:
        rows = es_summary(summary)
        document = dict(provenance(config), rows=rows)
        markdown = render(
            CHECKS_TEMPLATE,
            title="Equity-scaled summary",
            columns=["name", "m_all", "gap", "es"],
            rows=rows,
        )
        _write_outputs(config, "es_summary", document, markdown)
        if predictions is None:
            return

    pairs = read_predictions(predictions or config.predictions_file)
    document = fairness_reports(config, pairs, _manifest_if_present(config))
    _write_outputs(config, "report", document, render_report(document))


@click.command(
    "match-pairs", help="Counterfactual gaps over cross-group nearest neighbours."
)
@run_options
@predictions_option
@click.option(
    "--attribute",
    "attributes",
    help="Attribute to match across; defaults to the report attributes. Repeatable.",
    multiple=True,
)
@click.option(
    "--threshold",
    help="Minimum cosine similarity; shadows report.similarity_threshold.",
    type=float,
    default=None,
)
@exit_on_error
def match_pairs(config_path, seed, out, overrides, predictions, attributes, threshold):
    """CLI command for counterfactual matching."""
    if threshold is not None:
        overrides = tuple(overrides) + (("report.similarity_threshold", threshold),)
    config = resolve(config_path, seed, out, overrides)
    pairs = read_predictions(predictions or config.predictions_file)
    manifest = _manifest_if_present(config)
    lexicon = dict(manifest.lexicon) if manifest is not None else {}
    threshold = config.report.similarity_threshold

    results = []
    for attribute in attributes or report_attributes(config, pairs, manifest):
        for metric in report_metrics(config, lexicon):
            scores = 100.0 * score_pairs(pairs, metric, lexicon)
            result = counterfactual_gap(pairs, scores, attribute, threshold=threshold)
            results.append(
                {
                    "attribute": attribute,
                    "metric": metric,
                    "gap": result.gap,
                    "n_pairs": result.n_pairs,
                    "n_matched": result.n_matched,
                    "coverage": result.coverage,
                    "unmatched": result.unmatched,
                }
            )

    document = dict(provenance(config), threshold=threshold, results=results)
    markdown = render(
        COUNTERFACTUAL_TEMPLATE, threshold=threshold, seed=config.seed, results=results
    )
    _write_outputs(config, "counterfactual", document, markdown)
