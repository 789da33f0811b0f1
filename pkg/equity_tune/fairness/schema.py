"""Demographic attribute schema and loss weights."""

from collections import Counter
from typing import Dict, Iterable, List, Mapping

import attr

from ..util.exceptions import DataError


@attr.s(auto_attribs=True, frozen=True)
class AttributeSchema:
    """
    Ordered demographic attributes, their group labels and training frequencies.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    attributes: List[str] = attr.ib()
    groups: Dict[str, List[str]] = attr.ib()
    frequencies: Dict[str, Dict[str, int]] = attr.ib(factory=dict)

    @attributes.validator
    def validate_attributes(self, attribute, value):
        """Check that attribute names are unique and non-empty."""
        if not value:
            raise ValueError("A schema needs at least one attribute.")
        if len(set(value)) != len(value):
            raise ValueError(f"Duplicate attribute names in {value}.")

    @groups.validator
    def validate_groups(self, attribute, value):
        """Check that every attribute has at least two distinct group labels."""
        if set(value) != set(self.attributes):
            raise ValueError(
                f"Group sets {sorted(value)} do not match attributes {self.attributes}."
            )
        for name, labels in value.items():
            if len(labels) < 2 or len(set(labels)) != len(labels):
                raise ValueError(
                    f"Attribute {name} needs at least two distinct groups, "
                    f"got {labels}."
                )

    @frequencies.validator
    def validate_frequencies(self, attribute, value):
        """Check that frequencies cover known groups and agree on the total."""
        totals = set()
        for name, counts in value.items():
            if name not in self.groups:
                raise ValueError(f"Frequencies given for unknown attribute {name}.")
            unknown = set(counts) - set(self.groups[name])
            if unknown:
                raise ValueError(
                    f"Unknown groups {sorted(unknown)} for attribute {name}."
                )
            totals.add(sum(counts.values()))
        if len(totals) > 1:
            raise ValueError(
                f"Attribute frequencies sum to different totals: {sorted(totals)}."
            )

    def n_groups(self, name: str) -> int:
        """Number of groups of an attribute."""
        return len(self.groups[name])

    def group_index(self, name: str, label: str) -> int:
        """Position of a group label within its attribute."""
        if name not in self.groups:
            raise DataError(f"Unknown attribute {name}; schema has {self.attributes}")
        try:
            return self.groups[name].index(label)
        except ValueError:
            raise DataError(
                f"Label {label!r} is not a group of {name}; "
                f"expected one of {self.groups[name]}"
            )

    def frequency_vector(self, name: str) -> List[int]:
        """Training frequencies of an attribute's groups, in group order."""
        counts = self.frequencies.get(name, {})
        return [counts.get(label, 0) for label in self.groups[name]]

    def with_frequencies(
        self, labels: Iterable[Mapping[str, str]]
    ) -> "AttributeSchema":
        """Return a copy whose frequencies are counted from attribute mappings."""
        counters = {name: Counter() for name in self.attributes}
        for sample_attributes in labels:
            for name in self.attributes:
                if name not in sample_attributes:
                    raise DataError(f"Sample is missing attribute {name}")
                label = sample_attributes[name]
                self.group_index(name, label)
                counters[name][label] += 1
        frequencies = {
            name: {label: counters[name][label] for label in self.groups[name]}
            for name in self.attributes
        }
        return attr.evolve(self, frequencies=frequencies)


def _non_negative(instance, attribute, value):
    if value < 0:
        raise ValueError(f"{attribute.name} must be >= 0, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class LossWeights:
    """Global loss weights and per-attribute multipliers."""

    lambda_lm: float = attr.ib(1.0, validator=_non_negative)
    lambda_dim: float = attr.ib(1.0, validator=_non_negative)
    lambda_dac: float = attr.ib(1.0, validator=_non_negative)
    attribute_weights: Dict[str, float] = attr.Factory(dict)

    def __attrs_post_init__(self):
        """Reject the all-zero combination and negative attribute weights."""
        if self.lambda_lm == self.lambda_dim == self.lambda_dac == 0:
            raise ValueError("lambda_lm, lambda_dim and lambda_dac cannot all be zero.")
        for name, weight in self.attribute_weights.items():
            if weight < 0:
                raise ValueError(
                    f"Attribute weight for {name} must be >= 0, got {weight}."
                )

    def weight(self, name: str) -> float:
        """w_a of an attribute; 1.0 when not configured."""
        return float(self.attribute_weights.get(name, 1.0))
