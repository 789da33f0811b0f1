"""
Synthetic report corpus with controllable demographic leakage.

Every sample has a latent finding c drawn uniformly and one group per
attribute drawn from that attribute's marginals. Features are

    x = W_c[c] + sum_a leakage_a * W_a[group_a] + noise * N(0, I)

where the rows of W_c and of every W_a are distinct orthonormal directions.
The reference is the finding's phrase; for non-reference groups one slot of
the phrase is swapped for a group-specific token with probability
``phrasing_bias``.
"""

import logging
from typing import Dict, List, Tuple

import attr
import numpy as np

from ..fairness.schema import AttributeSchema
from ..model.config import EOS, FIRST_CONTENT_TOKEN
from ..util.common import config_hash
from ..util.exceptions import ConfigError
from .oracle import true_mi_oracle
from .records import Dataset, DatasetManifest, Sample

TOLERANCE = 1e-9


def _unit_interval(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{attribute.name} must lie in [0, 1], got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class AttributeSpec:
    """One demographic attribute of the generator."""

    name: str
    groups: List[str]
    marginals: List[float] = attr.ib()
    leakage: float = attr.ib(0.8, validator=_unit_interval)
    phrasing_bias: float = attr.ib(0.5, validator=_unit_interval)

    @marginals.validator
    def validate_marginals(self, attribute, value):
        """Marginals align with groups, are non-negative and sum to 1."""
        if len(value) != len(self.groups):
            raise ValueError(
                f"{self.name} has {len(self.groups)} groups but {len(value)} marginals."
            )
        if any(m < 0 for m in value) or abs(sum(value) - 1.0) > TOLERANCE:
            raise ValueError(
                f"Marginals of {self.name} must be >= 0 and sum to 1: {value}."
            )


def default_attributes() -> List[AttributeSpec]:
    """Gender, age band and race with coarse real-world-like marginals."""
    return [
        AttributeSpec(name="gender", groups=["male", "female"], marginals=[0.5, 0.5]),
        AttributeSpec(
            name="age", groups=["0-45", "45-65", "65+"], marginals=[0.3, 0.4, 0.3]
        ),
        AttributeSpec(
            name="race",
            groups=["white", "black", "asian", "hispanic", "other"],
            marginals=[0.6, 0.15, 0.1, 0.1, 0.05],
        ),
    ]


@attr.s(auto_attribs=True, frozen=True)
class SynthConfig:
    """
    Generator settings.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    n_samples: int = attr.ib(2000)
    feature_dim: int = 16
    n_findings: int = attr.ib(4)
    phrase_len: int = attr.ib(5)
    noise: float = attr.ib(0.1)
    seed: int = 0
    attributes: List[AttributeSpec] = attr.Factory(default_attributes)

    @n_samples.validator
    def validate_n_samples(self, attribute, value):
        """At least one sample."""
        if value < 1:
            raise ValueError(f"n_samples must be >= 1, got {value}.")

    @n_findings.validator
    def validate_n_findings(self, attribute, value):
        """At least one finding class."""
        if value < 1:
            raise ValueError(f"n_findings must be >= 1, got {value}.")

    @phrase_len.validator
    def validate_phrase_len(self, attribute, value):
        """Every attribute needs its own slot in the phrase."""
        if value < 1 + len(self.attributes):
            raise ValueError(
                f"phrase_len {value} leaves no slot for each of "
                f"{len(self.attributes)} attributes."
            )

    @noise.validator
    def validate_noise(self, attribute, value):
        """Noise scale is non-negative."""
        if value < 0:
            raise ValueError(f"noise must be >= 0, got {value}.")

    def schema(self) -> AttributeSchema:
        """Attribute schema without frequencies."""
        return AttributeSchema(
            attributes=[a.name for a in self.attributes],
            groups={a.name: list(a.groups) for a in self.attributes},
        )

    @property
    def basis_size(self) -> int:
        """Number of orthonormal feature directions the generator needs."""
        return self.n_findings + sum(len(a.groups) for a in self.attributes)

    def group_token(self, attribute_index: int, group_index: int) -> int:
        """Token substituted into the phrase for a non-reference group."""
        offset = FIRST_CONTENT_TOKEN + self.n_findings * self.phrase_len
        for spec in self.attributes[:attribute_index]:
            offset += len(spec.groups) - 1
        return offset + group_index - 1

    @property
    def vocab_needed(self) -> int:
        """Smallest vocabulary that holds every generated token."""
        return self.group_token(len(self.attributes), 1)

    def finding_tokens(self, finding: int) -> List[int]:
        """Canonical phrase of a finding, without EOS."""
        start = FIRST_CONTENT_TOKEN + finding * self.phrase_len
        return list(range(start, start + self.phrase_len))

    def lexicon(self) -> Dict[str, int]:
        """Finding class to the head token of its phrase."""
        return {str(c): self.finding_tokens(c)[0] for c in range(self.n_findings)}


def feature_basis(config: SynthConfig) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Orthonormal finding directions and per-attribute group directions."""
    if config.feature_dim < config.basis_size:
        raise ConfigError(
            f"feature_dim {config.feature_dim} cannot embed {config.basis_size} "
            "orthogonal finding and group directions"
        )
    rng = np.random.default_rng(config.seed)
    q, _ = np.linalg.qr(rng.normal(size=(config.feature_dim, config.basis_size)))
    rows = q.T
    findings = rows[: config.n_findings]
    groups = {}
    start = config.n_findings
    for spec in config.attributes:
        groups[spec.name] = rows[start : start + len(spec.groups)]
        start += len(spec.groups)
    return findings, groups


def template_distribution(
    config: SynthConfig, groups: Dict[str, str]
) -> Dict[Tuple[int, ...], float]:
    """Exact distribution over references of a finding-0 sample with these groups."""
    distribution = {tuple(config.finding_tokens(0)): 1.0}
    for index, spec in enumerate(config.attributes):
        group_index = spec.groups.index(groups[spec.name])
        if group_index == 0 or spec.phrasing_bias == 0:
            continue
        updated: Dict[Tuple[int, ...], float] = {}
        for tokens, p in distribution.items():
            variant = list(tokens)
            variant[1 + index] = config.group_token(index, group_index)
            variant = tuple(variant)
            bias = spec.phrasing_bias
            updated[variant] = updated.get(variant, 0.0) + p * bias
            updated[tokens] = updated.get(tokens, 0.0) + p * (1.0 - bias)
        distribution = updated
    return distribution


def synth_generate(config: SynthConfig) -> Tuple[Dataset, DatasetManifest]:
    """Draw a dataset; identical configs give identical datasets."""
    findings, group_basis = feature_basis(config)
    rng = np.random.default_rng(config.seed + 1)
    samples = []
    for i in range(config.n_samples):
        finding = int(rng.integers(config.n_findings))
        x = findings[finding].copy()
        attributes = {}
        reference = config.finding_tokens(finding)
        for index, spec in enumerate(config.attributes):
            group_index = int(rng.choice(len(spec.groups), p=spec.marginals))
            attributes[spec.name] = spec.groups[group_index]
            x += spec.leakage * group_basis[spec.name][group_index]
            variant = rng.random() < spec.phrasing_bias
            if group_index > 0 and variant:
                reference[1 + index] = config.group_token(index, group_index)
        x += config.noise * rng.normal(size=config.feature_dim)
        samples.append(
            Sample(
                id=f"s{i:06d}",
                features=[float(v) for v in x],
                attributes=attributes,
                reference=reference + [EOS],
                labels=[finding],
            )
        )

    dataset = Dataset(schema=config.schema(), samples=samples)
    true_mi = true_mi_oracle(config) if config.noise == 0 else None
    manifest = DatasetManifest.from_dataset(
        dataset,
        config_hash=config_hash(config),
        config=attr.asdict(config),
        true_mi=true_mi,
        lexicon=config.lexicon(),
    )
    dataset = attr.evolve(dataset, schema=manifest.schema)
    logging.info(
        f"Generated {len(samples)} samples over {config.n_findings} findings; "
        f"group counts {manifest.group_counts}"
    )
    return dataset, manifest
