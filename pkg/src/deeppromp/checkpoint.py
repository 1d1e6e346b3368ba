"""Versioned JSON checkpoints for every model kind.

Envelope: ``{"format": "deeppromp.checkpoint", "version": 1, "kind": ...}``
plus the model's own fields. Network layers are stored as ``sizes`` and
row-major weight lists; floats round-trip exactly.
"""

from __future__ import annotations

import json

from .baselines.cnmp import CNMP
from .baselines.promp import ProMP
from .model import CHECKPOINT_FORMAT, CHECKPOINT_VERSION, DeepProMP

KINDS = {"deeppromp": DeepProMP, "promp": ProMP, "cnmp": CNMP}


class CheckpointError(ValueError):
    pass


def checkpoint_dict(model):
    body = model.to_dict()
    body.update(format=CHECKPOINT_FORMAT, version=CHECKPOINT_VERSION)
    return body


def save_checkpoint(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(model), fh, sort_keys=True)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        try:
            body = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: malformed checkpoint ({exc.msg})") from None
    return from_checkpoint_dict(body)


def from_checkpoint_dict(body):
    if body.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a deeppromp checkpoint")
    if body.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {body.get('version')!r} unsupported")
    kind = body.get("kind")
    if kind not in KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    return KINDS[kind].from_dict(body)
