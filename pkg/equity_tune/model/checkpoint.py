"""Save and load model states and DAC heads as ``.npz`` containers."""

import logging
from pathlib import Path
from typing import Dict, Optional

import attr
import cattr
import numpy as np
import ujson

from ..fairness.dac import DacHead
from ..fairness.schema import AttributeSchema
from ..numerics import Tensor
from ..util.exceptions import DataError
from .config import ModelConfig
from .decoder import ModelState

FORMAT_VERSION = 1
META_KEY = "__meta__"
SEPARATOR = "::"


@attr.s(auto_attribs=True, frozen=True)
class Checkpoint:
    """A model state with its DAC heads and provenance."""

    state: ModelState
    heads: Dict[str, DacHead] = attr.Factory(dict)
    schema: Optional[AttributeSchema] = None
    seed: int = 0
    extra: dict = attr.Factory(dict)


def save_checkpoint(path, checkpoint: Checkpoint):
    """Write every array bit-exactly plus a JSON metadata entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = checkpoint.state
    arrays = {}
    for group, params in (
        ("frozen", state.frozen),
        ("projector", state.projector),
        ("adapters", state.adapters),
    ):
        for name, tensor in params.items():
            arrays[f"{group}{SEPARATOR}{name}"] = tensor.data
    for attribute, head in checkpoint.heads.items():
        for name, tensor in head.params.items():
            arrays[f"dac{SEPARATOR}{attribute}{SEPARATOR}{name}"] = tensor.data

    meta = {
        "format_version": FORMAT_VERSION,
        "model": cattr.unstructure(state.config),
        "instruction": list(state.instruction),
        "heads": {a: list(h.groups) for a, h in checkpoint.heads.items()},
        "schema": cattr.unstructure(checkpoint.schema) if checkpoint.schema else None,
        "seed": checkpoint.seed,
        "extra": checkpoint.extra,
    }
    arrays[META_KEY] = np.array(ujson.dumps(meta, sort_keys=True))
    with open(path, "wb") as file_obj:
        np.savez(file_obj, **arrays)
    logging.info(f"Wrote checkpoint {path}")


def load_checkpoint(path) -> Checkpoint:
    """Read a container written by ``save_checkpoint``."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Checkpoint {path} does not exist")
    with np.load(path, allow_pickle=False) as archive:
        if META_KEY not in archive.files:
            raise DataError(f"{path} is not a checkpoint: no {META_KEY} entry")
        meta = ujson.loads(str(archive[META_KEY]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise DataError(
                f"Unsupported checkpoint format {meta.get('format_version')} "
                f"in {path}; expected {FORMAT_VERSION}"
            )
        groups: Dict[str, Dict[str, Tensor]] = {
            "frozen": {},
            "projector": {},
            "adapters": {},
        }
        head_params: Dict[str, Dict[str, Tensor]] = {a: {} for a in meta["heads"]}
        for key in archive.files:
            if key == META_KEY:
                continue
            parts = key.split(SEPARATOR)
            if parts[0] == "dac":
                head_params[parts[1]][parts[2]] = Tensor(archive[key])
            else:
                groups[parts[0]][parts[1]] = Tensor(archive[key])

    state = ModelState(
        config=cattr.structure(meta["model"], ModelConfig),
        frozen=groups["frozen"],
        projector=groups["projector"],
        adapters=groups["adapters"],
        instruction=tuple(meta["instruction"]),
    )
    heads = {
        attribute: DacHead(
            attribute=attribute, groups=tuple(labels), params=head_params[attribute]
        )
        for attribute, labels in meta["heads"].items()
    }
    schema = None
    if meta["schema"]:
        schema = cattr.structure(meta["schema"], AttributeSchema)
    return Checkpoint(
        state=state, heads=heads, schema=schema, seed=meta["seed"], extra=meta["extra"]
    )
