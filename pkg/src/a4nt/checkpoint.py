"""Checkpoint persistence: versioned magic, JSON header describing every
named array (name, shape, byte offset), then a little-endian float32 blob.
The vocabulary is embedded so inference needs no corpus."""

from __future__ import annotations

import datetime
import json
import struct
from typing import Optional

import numpy as np

from .classifier import ClassifierModel
from .data import Vocabulary
from .losses import LanguageModel, SemanticEmbedder
from .translator import TranslatorModel

MAGIC = b"A4NTCKPT1"
VERSION = 1


class CheckpointError(ValueError):
    def __init__(self, reason: str, message: str):
        super().__init__(f"{reason}: {message}")
        self.reason = reason


def _model_kind(model) -> str:
    kind = getattr(model, "KIND", None)
    if kind is None:
        raise CheckpointError("kind", f"cannot checkpoint {type(model).__name__}")
    return kind


def save_checkpoint(model, path):
    arrays = {}
    manifest = []
    offset = 0
    for name, tensor in sorted(model.named_params().items()):
        data = np.ascontiguousarray(tensor.data, dtype="<f4")
        arrays[name] = data
        manifest.append({"name": name, "shape": list(data.shape),
                         "offset": offset, "size": data.nbytes})
        offset += data.nbytes
    header = {
        "version": VERSION,
        "kind": _model_kind(model),
        "config": model.config(),
        "vocab": model.vocab.to_json(),
        "frozen": bool(getattr(model, "frozen", False)),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "arrays": manifest,
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for entry in manifest:
            fh.write(arrays[entry["name"]].tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError("format", f"{path}: bad magic {magic!r}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
    if header.get("version") != VERSION:
        raise CheckpointError("version",
                              f"{path}: version {header.get('version')} != {VERSION}")
    return header


def load_checkpoint(path, expected_kind: Optional[str] = None):
    header = read_header(path)
    kind = header["kind"]
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError("kind", f"{path}: expected {expected_kind}, found {kind}")
    vocab = Vocabulary.from_json(header["vocab"])
    cfg = header["config"]
    if kind == "classifier":
        model = ClassifierModel(vocab, cfg["class_names"], d_emb=cfg["d_emb"],
                                d_h=cfg["d_h"], pooling=cfg["pooling"])
    elif kind == "translator":
        model = TranslatorModel(vocab, cfg["class_names"], d_emb=cfg["d_emb"],
                                d_h=cfg["d_h"])
    elif kind == "lm":
        model = LanguageModel(vocab, cfg["class_name"], d_emb=cfg["d_emb"],
                              d_h=cfg["d_h"])
    elif kind == "embedder":
        model = SemanticEmbedder(vocab, d_emb=cfg["d_emb"], d_h=cfg["d_h"])
    else:
        raise CheckpointError("kind", f"{path}: unknown model kind {kind!r}")

    params = model.named_params()
    manifest = header["arrays"]
    blob_start = len(MAGIC) + 8 + len(json.dumps(header).encode("utf-8"))
    with open(path, "rb") as fh:
        fh.seek(len(MAGIC))
        (hlen,) = struct.unpack("<Q", fh.read(8))
        fh.seek(len(MAGIC) + 8 + hlen)
        blob = fh.read()
    expected_size = sum(e["size"] for e in manifest)
    if len(blob) < expected_size:
        raise CheckpointError("truncated",
                              f"{path}: blob has {len(blob)} bytes, need {expected_size}")
    if set(params) != {e["name"] for e in manifest}:
        raise CheckpointError("arrays", f"{path}: array names do not match model kind")
    for entry in manifest:
        tensor = params[entry["name"]]
        arr = np.frombuffer(blob, dtype="<f4", count=entry["size"] // 4,
                            offset=entry["offset"]).reshape(entry["shape"])
        if tuple(arr.shape) != tuple(tensor.data.shape):
            raise CheckpointError(
                "shape", f"{path}: {entry['name']} has shape {arr.shape}, "
                         f"model expects {tensor.data.shape}")
        tensor.data = arr.copy()
    if header.get("frozen") and hasattr(model, "freeze"):
        model.freeze()
    return model
