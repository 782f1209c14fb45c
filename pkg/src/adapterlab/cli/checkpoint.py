"""On-disk checkpoints: ``manifest.json`` + ``params.bin`` (+ optional ``vocab.json``).

The blob holds every parameter's current value followed by every initial
snapshot, each as little-endian float64 at the byte offsets the manifest
lists.  A SHA-256 of the blob guards against silent corruption.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..config import AdapterConfig, TransformerConfig, TuningPolicy
from ..data.vocab import Vocabulary
from ..model import EncoderModel
from ..tensor.core import Parameter

FORMAT_VERSION = 1
DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    model: EncoderModel,
    path,
    policy: Optional[TuningPolicy] = None,
    step: int = 0,
    vocab: Optional[Vocabulary] = None,
) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries, initial, chunks, offset = [], [], [], 0
    for name, p in model.params.items():
        raw = np.ascontiguousarray(p.data, dtype=DTYPE).tobytes()
        entries.append({"name": name, "shape": list(p.shape), "offset": offset, "length": len(raw), "frozen": p.frozen})
        chunks.append(raw)
        offset += len(raw)
    for name, p in model.params.items():
        raw = np.ascontiguousarray(p.initial, dtype=DTYPE).tobytes()
        initial.append({"name": name, "offset": offset, "length": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "format_version": FORMAT_VERSION,
        "model": model.spec(),
        "policy": policy.to_dict() if policy is not None else None,
        "step": int(step),
        "params": entries,
        "initial": initial,
        "blob_bytes": len(blob),
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    (path / "params.bin").write_bytes(blob)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    if vocab is not None:
        (path / "vocab.json").write_text(json.dumps(vocab.to_dict()))
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    f = path / "manifest.json"
    if not f.exists():
        raise CheckpointError(f"{path} is not a checkpoint (no manifest.json)")
    manifest = json.loads(f.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version!r} (this build reads {FORMAT_VERSION})")
    return manifest


def _check_layout(manifest: dict) -> None:
    expected = 0
    for e in manifest["params"] + manifest["initial"]:
        if e["offset"] != expected:
            raise CheckpointError(f"parameter {e['name']!r}: offset {e['offset']} breaks contiguity (expected {expected})")
        expected += e["length"]
    if expected != manifest["blob_bytes"]:
        raise CheckpointError(f"manifest lengths sum to {expected} bytes but blob_bytes says {manifest['blob_bytes']}")


def _model_from_spec(spec: dict) -> EncoderModel:
    adapters = AdapterConfig(**spec["adapters"]) if spec["adapters"] else None
    return EncoderModel(TransformerConfig.from_dict(spec["config"]), spec["num_classes"], adapters, spec["seed"])


def load_checkpoint(path, into: Optional[EncoderModel] = None) -> EncoderModel:
    """Rebuild the model stored at ``path`` (or fill ``into``, which must match)."""
    path = Path(path)
    manifest = read_manifest(path)
    _check_layout(manifest)
    blob_path = path / "params.bin"
    if not blob_path.exists():
        raise CheckpointError(f"{path} has no params.bin")
    blob = blob_path.read_bytes()
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(f"params.bin is {len(blob)} bytes; manifest expects {manifest['blob_bytes']}")
    if hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise CheckpointError("params.bin checksum mismatch; the blob is corrupted")
    model = into if into is not None else _model_from_spec(manifest["model"])
    stored = [(e["name"], tuple(e["shape"])) for e in manifest["params"]]
    wanted = [(name, p.shape) for name, p in model.params.items()]
    for i in range(max(len(stored), len(wanted))):
        s = stored[i] if i < len(stored) else None
        w = wanted[i] if i < len(wanted) else None
        if s != w:
            name = (w or s)[0]
            raise CheckpointError(f"checkpoint does not match the model at parameter {name!r}: stored {s}, model {w}")

    def read(entry, shape):
        return np.frombuffer(blob, DTYPE, entry["length"] // DTYPE.itemsize, entry["offset"]).reshape(shape).astype(np.float64)

    for entry, init in zip(manifest["params"], manifest["initial"]):
        shape = tuple(entry["shape"])
        model.params[entry["name"]] = Parameter(entry["name"], read(entry, shape), entry["frozen"], read(init, shape))
    model._build()
    return model


def load_vocab(path) -> Optional[Vocabulary]:
    f = Path(path) / "vocab.json"
    return Vocabulary.from_dict(json.loads(f.read_text())) if f.exists() else None


def load_policy(path) -> Optional[TuningPolicy]:
    d = read_manifest(path)["policy"]
    return TuningPolicy.from_dict(d) if d else None
