"""Model files: one JSON document inside a magic/version envelope.

Layout (keys in this order)::

    {"magic":"SOLR","schema_version":1,"created_at":"...Z",
     "pipeline":{...},"model":{"kind":...,"state":{...}},"config":{...}}

Floats are written with ``repr`` precision so a load reproduces every
parameter bit for bit.
"""

from __future__ import annotations

import json
import re
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .ensemble import StackedEnsemble
from .errors import BadMagic, CorruptPayload, IoError, UnsupportedVersion
from .learners import model_from_dict, model_to_dict
from .preprocess import FittedPipeline

MAGIC = "SOLR"
SCHEMA_VERSION = 1

_MAGIC_PREFIX = re.compile(rb'^\s*\{\s*"magic"\s*:\s*"SOLR"')


def serialize_model(model) -> dict:
    if isinstance(model, StackedEnsemble):
        return {"kind": "stack", "state": model.to_dict()}
    return model_to_dict(model)


def deserialize_model(d: dict):
    if d["kind"] == "stack":
        return StackedEnsemble.from_dict(d["state"])
    return model_from_dict(d)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def utc_stamp(epoch: float | None = None) -> str:
    dt = datetime.now(timezone.utc) if epoch is None else datetime.fromtimestamp(epoch, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def dumps_model(model, pipeline: FittedPipeline | None, config: dict | None = None,
                created_at: str | None = None) -> str:
    doc = {
        "magic": MAGIC,
        "schema_version": SCHEMA_VERSION,
        "created_at": created_at or utc_stamp(),
        "pipeline": pipeline.to_dict() if pipeline is not None else None,
        "model": serialize_model(model),
        "config": config or {},
    }
    return json.dumps(doc, separators=(",", ":"), allow_nan=False, default=_json_default) + "\n"


def save_model(model, pipeline: FittedPipeline | None, path, config: dict | None = None,
               created_at: str | None = None) -> None:
    text = dumps_model(model, pipeline, config, created_at)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write model file {path}: {exc}") from exc


def read_model_file(path) -> dict:
    """Validate the envelope and return the raw document."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read model file {path}: {exc}") from exc
    if not _MAGIC_PREFIX.match(raw):
        raise BadMagic(f"{path} is not a solarcast model file")
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("magic") != MAGIC:
        raise BadMagic(f"{path} is not a solarcast model file")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise UnsupportedVersion(f"{path}: schema_version {doc.get('schema_version')!r} "
                                 f"(supported: {SCHEMA_VERSION})")
    return doc


def load_model_file(path):
    """Return ``(model, pipeline, document)``."""
    doc = read_model_file(path)
    try:
        model = deserialize_model(doc["model"])
        pipeline = FittedPipeline.from_dict(doc["pipeline"]) if doc.get("pipeline") else None
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptPayload(f"{path}: malformed payload ({exc!r})") from exc
    return model, pipeline, doc


def load_model(path):
    model, pipeline, _ = load_model_file(path)
    return model, pipeline
