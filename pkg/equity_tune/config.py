"""Run configuration: YAML documents, strict key checking and overrides."""

import copy
import typing
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import attr
import cattr
import yaml

from .data.synth import SynthConfig
from .model.config import ModelConfig
from .trainer.config import TrainConfig
from .util.exceptions import ConfigError

DEFAULT_CONFIG_FILE = "equity_tune.yaml"
METRIC_NAMES = ("bleu1", "bleu4", "rougeL", "diagnosis")


class ConfigParseError(ConfigError):
    """Raised when a config document does not match the expected structure."""

    def __init__(self, message):
        """Explain the expected format along with the problem."""
        message = f"""
        {message}

        Expected yaml format:
        data:
            synth: {{n_samples: int, noise: float, attributes: [...]}}
            train_fraction: float
        model: {{n_layers: int, d_model: int, ...}}
        train: {{epochs: int, weights: {{lambda_lm: float, ...}}, ...}}
        eval: {{max_new: int, parallelism: int}}
        report: {{attributes: [string], metrics: [string], ...}}
        paths: {{out: string}}
        seed: int
        """

        super(ConfigParseError, self).__init__(message)


@attr.s(auto_attribs=True, frozen=True)
class DataSection:
    """
    Where the dataset comes from and how it is split.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    synth: SynthConfig = attr.Factory(SynthConfig)
    input_path: Optional[str] = None
    dataset_path: Optional[str] = None
    manifest_path: Optional[str] = None
    train_fraction: float = attr.ib(0.8)

    @train_fraction.validator
    def validate_train_fraction(self, attribute, value):
        """Both splits need samples."""
        if not 0.0 < value < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class EvalSection:
    """Greedy generation over the test split."""

    max_new: int = attr.ib(12)
    parallelism: int = attr.ib(4)
    chunk_size: int = attr.ib(32)

    @max_new.validator
    def validate_max_new(self, attribute, value):
        """At least one generated token."""
        if value < 1:
            raise ValueError(f"max_new must be >= 1, got {value}.")

    @parallelism.validator
    def validate_parallelism(self, attribute, value):
        """At least one worker."""
        if value < 1:
            raise ValueError(f"parallelism must be >= 1, got {value}.")

    @chunk_size.validator
    def validate_chunk_size(self, attribute, value):
        """At least one sample per chunk."""
        if value < 1:
            raise ValueError(f"chunk_size must be >= 1, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class ReportSection:
    """Which fairness summaries to compute."""

    attributes: List[str] = attr.Factory(list)
    metrics: List[str] = attr.ib(factory=lambda: list(METRIC_NAMES))
    min_count: int = 10
    n_resamples: int = attr.ib(1000)
    m_all_mode: str = attr.ib("sample")
    control_attributes: List[str] = attr.Factory(list)
    similarity_threshold: float = 0.7

    @metrics.validator
    def validate_metrics(self, attribute, value):
        """Only registered per-pair metrics."""
        unknown = [m for m in value if m not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"Unknown metrics {unknown}; use any of {METRIC_NAMES}.")

    @m_all_mode.validator
    def validate_m_all_mode(self, attribute, value):
        """Sample mean or unweighted group mean."""
        if value not in ("sample", "group"):
            raise ValueError(f"Invalid m_all_mode {value}; use sample or group.")

    @n_resamples.validator
    def validate_n_resamples(self, attribute, value):
        """Zero disables the bootstrap."""
        if value < 0:
            raise ValueError(f"n_resamples must be >= 0, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class PathsSection:
    """Output location of every artifact."""

    out: str = "out"


@attr.s(auto_attribs=True, frozen=True)
class RunConfig:
    """
    Fully resolved configuration of a run.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    data: DataSection = attr.Factory(DataSection)
    model: ModelConfig = attr.Factory(ModelConfig)
    train: TrainConfig = attr.Factory(TrainConfig)
    eval: EvalSection = attr.Factory(EvalSection)
    report: ReportSection = attr.Factory(ReportSection)
    paths: PathsSection = attr.Factory(PathsSection)
    seed: int = 0

    def __attrs_post_init__(self):
        """Synthetic data must fit the model vocabulary and feature width."""
        if self.data.input_path is not None:
            return
        synth = self.data.synth
        if self.model.vocab_size < synth.vocab_needed:
            raise ValueError(
                f"model.vocab_size {self.model.vocab_size} is smaller than the "
                f"{synth.vocab_needed} tokens the generator uses."
            )
        if self.model.feature_dim != synth.feature_dim:
            raise ValueError(
                f"model.feature_dim {self.model.feature_dim} does not match "
                f"data.synth.feature_dim {synth.feature_dim}."
            )

    def artifact(self, name: str) -> Path:
        """Path of an artifact in the output directory."""
        return Path(self.paths.out) / name

    def _configured(self, path: Optional[str], name: str) -> Path:
        return Path(path) if path else self.artifact(name)

    @property
    def dataset_file(self) -> Path:
        """Dataset JSONL file."""
        return self._configured(self.data.dataset_path, "dataset.jsonl")

    @property
    def manifest_file(self) -> Path:
        """Dataset manifest sidecar."""
        return self._configured(self.data.manifest_path, "manifest.json")

    @property
    def checkpoint_file(self) -> Path:
        """Trained checkpoint."""
        return self._configured(self.train.checkpoint_path, "checkpoint.npz")

    @property
    def train_log_file(self) -> Path:
        """Training log."""
        return self._configured(self.train.log_path, "train_log.jsonl")

    @property
    def predictions_file(self) -> Path:
        """Predictions of the eval command."""
        return self.artifact("predictions.jsonl")

    def to_dict(self) -> dict:
        """Unstructured form echoed into every artifact."""
        return cattr.unstructure(self)


def _nested_class(field_type):
    """The attrs class a field holds, directly or as list elements, if any."""
    if attr.has(field_type):
        return field_type, False
    origin = typing.get_origin(field_type)
    if origin in (list, List, tuple, Tuple):
        args = [a for a in typing.get_args(field_type) if a is not Ellipsis]
        if len(args) == 1 and attr.has(args[0]):
            return args[0], True
    return None, False


def check_keys(document: Any, cls, path: str = ""):
    """Reject keys that are not fields of the attrs class, recursively."""
    if not isinstance(document, dict):
        raise ConfigParseError(
            f"Expected a mapping at {path or 'top level'}, got {document!r}"
        )
    fields = {f.name: f for f in attr.fields(cls)}
    for key, value in document.items():
        dotted = f"{path}.{key}" if path else str(key)
        if key not in fields:
            raise ConfigParseError(f"Unknown configuration key {dotted}")
        nested, is_list = _nested_class(fields[key].type)
        if nested is None or value is None:
            continue
        if is_list:
            if not isinstance(value, list):
                raise ConfigParseError(f"Expected a list at {dotted}, got {value!r}")
            for index, item in enumerate(value):
                check_keys(item, nested, f"{dotted}[{index}]")
        else:
            check_keys(value, nested, dotted)


def apply_override(document: dict, key: str, value):
    """Set a dotted key in a raw config document, creating sections as needed."""
    parts = key.split(".")
    if not all(parts):
        raise ConfigParseError(f"Invalid override key {key!r}")
    node = document
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        elif not isinstance(child, dict):
            raise ConfigParseError(f"Cannot override {key}: {part} is not a section")
        node = child
    node[parts[-1]] = value


def read_document(path) -> dict:
    """Load a YAML config document; a missing default file means defaults."""
    if path is None:
        if not Path(DEFAULT_CONFIG_FILE).is_file():
            return {}
        path = DEFAULT_CONFIG_FILE
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist")
    with open(path, "r") as yaml_stream:
        try:
            document = yaml.safe_load(yaml_stream)
        except yaml.YAMLError as e:
            raise ConfigParseError(f"Invalid YAML in {path}: {e}")
    return document or {}


def resolve_config(
    document: dict,
    overrides: Sequence[Tuple[str, Any]] = (),
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> RunConfig:
    """
    Apply overrides to a raw document and structure it into a RunConfig.

    Overrides strictly shadow file values. ``seed`` is applied last and is
    copied into the data and train sections; without it, the top-level seed
    fills section seeds that are not set explicitly.
    """
    document = copy.deepcopy(document)
    for key, value in overrides:
        apply_override(document, key, value)
    if out is not None:
        apply_override(document, "paths.out", out)
    check_keys(document, RunConfig)

    if seed is not None:
        document["seed"] = seed
        apply_override(document, "data.synth.seed", seed)
        apply_override(document, "train.seed", seed)
    else:
        top = document.get("seed", 0)
        synth = document.setdefault("data", {}).setdefault("synth", {})
        synth.setdefault("seed", top)
        document.setdefault("train", {}).setdefault("seed", top)

    converter = cattr.Converter()
    try:
        return converter.structure(document, RunConfig)
    except Exception as e:  # validators raise ValueError; cattrs may group them
        raise ConfigParseError(f"Invalid configuration: {e!r}")


def load_config(
    path=None,
    overrides: Sequence[Tuple[str, Any]] = (),
    seed: Optional[int] = None,
    out: Optional[str] = None,
) -> RunConfig:
    """Read, override and validate a config file."""
    return resolve_config(read_document(path), overrides, seed=seed, out=out)


def dump_config(config: RunConfig) -> str:
    """YAML echo of the resolved config."""
    return yaml.safe_dump(config.to_dict(), sort_keys=True)
