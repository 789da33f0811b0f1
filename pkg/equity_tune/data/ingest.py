"""Load externally supplied labeled datasets."""

import logging
from typing import Optional, Tuple

from ..fairness.schema import AttributeSchema
from ..util.common import read_jsonl
from ..util.exceptions import DataError
from .records import Dataset, Sample

MAX_DROP_FRACTION = 0.5
REQUIRED_FIELDS = ("features", "reference")


def ingest_jsonl(
    path, schema: AttributeSchema, vocab_size: int, feature_dim: Optional[int] = None
) -> Tuple[Dataset, int]:
    """
    Read and validate a line-delimited JSON dataset.

    Each line is an object with ``features``, ``attributes`` and ``reference``
    and optionally ``id``, ``labels`` and ``split``. Records missing any
    schema attribute are dropped and counted; any other defect is an error
    naming the line. Returns the dataset and the drop count.
    """
    samples = []
    dropped = 0
    total = 0
    for line_number, row in read_jsonl(path):
        total += 1
        where = f"{path}:{line_number}"
        if not isinstance(row, dict):
            raise DataError(f"{where}: expected a JSON object")
        for field in REQUIRED_FIELDS:
            if field not in row:
                raise DataError(f"{where}: missing field {field}")
        attributes = row.get("attributes") or {}
        if not isinstance(attributes, dict):
            raise DataError(f"{where}: attributes must be an object")
        if any(attributes.get(name) is None for name in schema.attributes):
            dropped += 1
            continue
        for name in schema.attributes:
            if attributes[name] not in schema.groups[name]:
                raise DataError(
                    f"{where}: {attributes[name]!r} is not a group of {name}; "
                    f"expected one of {schema.groups[name]}"
                )
        reference = row["reference"]
        if not isinstance(reference, list) or not reference:
            raise DataError(f"{where}: reference must be a non-empty list")
        if any(
            not isinstance(t, int) or isinstance(t, bool) or t < 0 or t >= vocab_size
            for t in reference
        ):
            raise DataError(
                f"{where}: reference tokens must be integers in 0..{vocab_size - 1}"
            )
        features = row["features"]
        if not isinstance(features, list):
            raise DataError(f"{where}: features must be a list of numbers")
        try:
            features = [float(v) for v in features]
        except (TypeError, ValueError) as e:
            raise DataError(f"{where}: features must be a list of numbers") from e
        if feature_dim is not None and len(features) != feature_dim:
            raise DataError(
                f"{where}: expected {feature_dim} features, got {len(features)}"
            )
        samples.append(
            Sample(
                id=str(row.get("id", f"line{line_number}")),
                features=features,
                attributes={name: attributes[name] for name in schema.attributes},
                reference=list(reference),
                labels=list(row.get("labels", [])),
                split=row.get("split"),
            )
        )

    if total == 0:
        raise DataError(f"{path} contains no records")
    if dropped > MAX_DROP_FRACTION * total:
        raise DataError(
            f"{dropped} of {total} records in {path} are missing demographic attributes"
        )
    if dropped:
        logging.warning(
            f"Dropped {dropped} of {total} records missing demographic attributes"
        )
    dataset = Dataset(
        schema=schema.with_frequencies(s.attributes for s in samples), samples=samples
    )
    logging.info(f"Ingested {len(samples)} records from {path}")
    return dataset, dropped
