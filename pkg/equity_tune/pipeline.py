"""Data, training, evaluation and reporting steps shared by the commands."""

import logging
from functools import partial
from multiprocessing.pool import ThreadPool
from typing import Dict, List, Optional, Sequence, Tuple

import attr
import cattr
import numpy as np

from .config import RunConfig
from .data.ingest import ingest_jsonl
from .data.records import Dataset, DatasetManifest, Sample
from .data.split import split_dataset
from .data.synth import synth_generate
from .metrics.analysis import cross_sectional_gaps
from .metrics.fairness_report import FairnessReport, build_report
from .metrics.pairs import ScoredPair, score_pairs
from .metrics.render import REPORT_TEMPLATE, render
from .model.checkpoint import Checkpoint, save_checkpoint
from .model.config import EOS
from .model.decoder import (
    ModelState,
    frozen_checksum,
    generate_batch,
    init_state,
    pooled_states,
)
from .trainer.loop import TrainResult, train_run
from .util.common import config_hash
from .util.exceptions import DataError, NumericError

SPLITS = ("train", "test")


def provenance(config: RunConfig) -> dict:
    """Resolved config and seed embedded in every artifact."""
    return {"config": config.to_dict(), "seed": config.seed}


def generate_data(config: RunConfig) -> Tuple[Dataset, DatasetManifest]:
    """Synthesize or ingest a dataset and tag every sample with its split."""
    if config.data.input_path:
        dataset, dropped = ingest_jsonl(
            config.data.input_path,
            config.data.synth.schema(),
            config.model.vocab_size,
            config.model.feature_dim,
        )
        manifest = DatasetManifest.from_dataset(
            dataset, config_hash=config_hash(config.to_dict()), config=config.to_dict()
        )
    else:
        dataset, manifest = synth_generate(config.data.synth)
        manifest = attr.evolve(manifest, config=config.to_dict())

    if all(s.split in SPLITS for s in dataset.samples):
        logging.info("Keeping the split tags of the input records")
        return dataset, manifest
    train, test = split_dataset(dataset, config.data.train_fraction, seed=config.seed)
    splits = {s.id: "train" for s in train.samples}
    splits.update({s.id: "test" for s in test.samples})
    samples = [attr.evolve(s, split=splits[s.id]) for s in dataset.samples]
    logging.info(
        f"Split {len(dataset)} samples into {len(train)} train and {len(test)} test"
    )
    return attr.evolve(dataset, samples=samples), manifest


def write_data(config: RunConfig, dataset: Dataset, manifest: DatasetManifest):
    """Write the dataset and its manifest."""
    dataset.write(config.dataset_file)
    manifest.write(config.manifest_file)
    logging.info(f"Wrote {config.dataset_file} and {config.manifest_file}")


def load_splits(config: RunConfig) -> Tuple[DatasetManifest, Dataset, Dataset]:
    """Manifest plus the train and test splits of the configured dataset."""
    manifest = DatasetManifest.read(config.manifest_file)
    dataset = Dataset.read(config.dataset_file, manifest.schema)
    parts = []
    for split in SPLITS:
        indices = [i for i, s in enumerate(dataset.samples) if s.split == split]
        if not indices:
            raise DataError(f"{config.dataset_file} has no {split} samples")
        parts.append(dataset.subset(indices))
    return manifest, parts[0], parts[1]


def train_model(config: RunConfig, train: Dataset) -> TrainResult:
    """Run training and confirm the frozen backbone did not move."""
    before = frozen_checksum(init_state(config.model, seed=config.train.seed))
    result = train_run(config.train, train, config.model, header=provenance(config))
    after = frozen_checksum(result.state)
    if before != after:
        raise NumericError(
            f"Frozen backbone changed during training: {before} != {after}"
        )
    logging.info(f"Frozen backbone checksum {after}")
    return result


def save_training(config: RunConfig, result: TrainResult):
    """Write the checkpoint and the training log."""
    extra = dict(provenance(config), frozen_checksum=frozen_checksum(result.state))
    save_checkpoint(
        config.checkpoint_file,
        Checkpoint(
            state=result.state,
            heads=result.heads,
            schema=result.schema,
            seed=config.seed,
            extra=extra,
        ),
    )
    result.log.write(config.train_log_file)


def _content(reference: Sequence[int]) -> List[int]:
    if len(reference) > 1 and reference[-1] == EOS:
        return list(reference[:-1])
    return list(reference)


def _predict_chunk(
    state: ModelState, max_new: int, samples: Sequence[Sample]
) -> List[ScoredPair]:
    features = np.array([s.features for s in samples], dtype=np.float64)
    generated = generate_batch(state, features, max_new)
    latents = pooled_states(state, features).data
    return [
        ScoredPair(
            id=s.id,
            generated=tokens,
            reference=_content(s.reference),
            attributes=dict(s.attributes),
            latent=[float(v) for v in latent],
            labels=list(s.labels),
        )
        for s, tokens, latent in zip(samples, generated, latents)
    ]


def predict(
    state: ModelState,
    dataset: Dataset,
    max_new: int,
    parallelism: int = 1,
    chunk_size: int = 32,
) -> List[ScoredPair]:
    """
    Greedy generations and pooled states for every sample.

    Chunks have a fixed size and results keep dataset order, so the output
    does not depend on the number of workers.
    """
    samples = dataset.samples
    chunks = [samples[i : i + chunk_size] for i in range(0, len(samples), chunk_size)]
    with ThreadPool(parallelism) as p:
        results = p.map(partial(_predict_chunk, state, max_new), chunks, chunksize=1)
    pairs = [pair for chunk in results for pair in chunk]
    logging.info(f"Generated {len(pairs)} predictions with {parallelism} workers")
    return pairs


def report_attributes(
    config: RunConfig, pairs: Sequence[ScoredPair], manifest: Optional[DatasetManifest]
) -> List[str]:
    """Configured attributes, else the manifest's, else those on the first pair."""
    if config.report.attributes:
        return list(config.report.attributes)
    if manifest is not None:
        return list(manifest.schema.attributes)
    return sorted(pairs[0].attributes)


def report_metrics(config: RunConfig, lexicon: Dict[str, int]) -> List[str]:
    """Configured metrics; diagnosis needs a lexicon."""
    metrics = list(config.report.metrics)
    if "diagnosis" in metrics and not lexicon:
        logging.warning("No finding lexicon available; skipping the diagnosis metric")
        metrics.remove("diagnosis")
    return metrics


def fairness_reports(
    config: RunConfig,
    pairs: Sequence[ScoredPair],
    manifest: Optional[DatasetManifest] = None,
    n_resamples: Optional[int] = None,
) -> dict:
    """Every configured metric x attribute report, plus cross-sectional gaps."""
    if not pairs:
        raise DataError("No predictions to report on")
    lexicon = dict(manifest.lexicon) if manifest is not None else {}
    groups = manifest.schema.groups if manifest is not None else {}
    section = config.report
    n_resamples = section.n_resamples if n_resamples is None else n_resamples
    attributes = report_attributes(config, pairs, manifest)
    metrics = report_metrics(config, lexicon)

    reports: List[FairnessReport] = []
    cross_sectional = []
    for metric in metrics:
        for attribute in attributes:
            reports.append(
                build_report(
                    pairs,
                    metric,
                    attribute,
                    groups=groups.get(attribute),
                    lexicon=lexicon,
                    min_count=section.min_count,
                    n_resamples=n_resamples,
                    seed=config.seed,
                    m_all_mode=section.m_all_mode,
                )
            )
        controls = list(section.control_attributes)
        if controls:
            scores = 100.0 * score_pairs(pairs, metric, lexicon)
            for target in attributes:
                if target in controls:
                    continue
                try:
                    result = cross_sectional_gaps(
                        pairs, scores, target, controls, min_count=section.min_count
                    )
                except DataError as e:
                    logging.warning(
                        f"No cross-sectional gap for {metric}/{target}: {e}"
                    )
                    continue
                cross_sectional.append(dict(metric=metric, **cattr.unstructure(result)))

    return dict(
        provenance(config),
        n_pairs=len(pairs),
        min_count=section.min_count,
        reports=[cattr.unstructure(r) for r in reports],
        cross_sectional=cross_sectional,
    )


def render_report(document: dict) -> str:
    """Markdown tables for a report document."""
    by_metric: Dict[str, list] = {}
    for report in document["reports"]:
        by_metric.setdefault(report["metric"], []).append(report)
    return render(
        REPORT_TEMPLATE,
        by_metric=by_metric,
        n_pairs=document["n_pairs"],
        seed=document["seed"],
        min_count=document["min_count"],
        cross_sectional=document["cross_sectional"],
    )
