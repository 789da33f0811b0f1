"""Generic utility functions."""

import hashlib
from pathlib import Path
from typing import Iterable, Iterator

import cattr
import ujson

from .exceptions import DataError


def config_hash(document) -> str:
    """Return a stable SHA-256 hex digest of a config object or dict."""
    if not isinstance(document, dict):
        document = cattr.unstructure(document)
    canonical = ujson.dumps(document, sort_keys=True, escape_forward_slashes=False)
    return hashlib.sha256(canonical.encode("UTF-8")).hexdigest()


def write_jsonl(path, rows: Iterable[dict]):
    """Write rows as line-delimited JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as file_obj:
        for row in rows:
            file_obj.write(
                ujson.dumps(row, sort_keys=True, escape_forward_slashes=False)
            )
            file_obj.write("\n")


def read_jsonl(path) -> Iterator[tuple]:
    """Yield (line number, parsed row) for each non-blank line of a JSONL file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path} does not exist")
    with open(path, "r") as file_obj:
        for line_number, line in enumerate(file_obj, start=1):
            if not line.strip():
                continue
            try:
                yield line_number, ujson.loads(line)
            except ValueError as e:
                raise DataError(f"{path}:{line_number}: malformed JSON ({e})")


def write_json(path, document):
    """Write a JSON document with sorted keys and a trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        ujson.dumps(document, sort_keys=True, indent=2, escape_forward_slashes=False)
        + "\n"
    )


def read_json(path):
    """Read a JSON document."""
    with open(path, "r") as file_obj:
        return ujson.load(file_obj)
