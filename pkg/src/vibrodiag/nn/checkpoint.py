"""Checkpoint persistence: JSON manifest + little-endian float32 parameter blob.

``params.bin`` holds every trainable value in layer order (weights before
biases, gamma before beta). BatchNorm running statistics are not parameters
and live in ``buffers.bin`` with the same encoding.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import VibrodiagError
from .model import ModelSpec, Network, count_parameters

MANIFEST = "model.json"
PARAMS = "params.bin"
BUFFERS = "buffers.bin"
LE_F32 = np.dtype("<f4")


class CheckpointError(VibrodiagError):
    pass


def _pack(arrays):
    if not arrays:
        return b""
    return np.concatenate([np.asarray(a, dtype=LE_F32).ravel() for a in arrays]).tobytes()


def _unpack(raw, arrays, what):
    expected = sum(a.size for a in arrays) * 4
    if len(raw) != expected:
        raise CheckpointError(f"{what} holds {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype=LE_F32)
    pos = 0
    for a in arrays:
        a[...] = flat[pos:pos + a.size].reshape(a.shape)
        pos += a.size


def save_checkpoint(directory, net: Network, config=None, seed=0, trace=None, extra=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    params = _pack([p.values for p in net.parameters()])
    buffers = _pack(net.buffers())
    manifest = {
        "format": 1,
        "model": net.spec.to_dict(),
        "shapes": [list(p.shape) for p in net.parameters()],
        "n_parameters": count_parameters(net.spec),
        "params_sha256": hashlib.sha256(params).hexdigest(),
        "config": config or {},
        "seed": int(seed),
        "trace": trace or [],
    }
    if extra:
        manifest.update(extra)
    (d / PARAMS).write_bytes(params)
    (d / BUFFERS).write_bytes(buffers)
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_checkpoint(directory):
    """Rebuild the network stored in ``directory``; returns ``(net, manifest)``."""
    d = Path(directory)
    try:
        manifest = json.loads((d / MANIFEST).read_text())
        raw_params = (d / PARAMS).read_bytes()
        raw_buffers = (d / BUFFERS).read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"incomplete checkpoint: {exc.filename} missing") from None
    spec = ModelSpec.from_dict(manifest["model"])
    if len(raw_params) != count_parameters(spec) * 4:
        raise CheckpointError(
            f"parameter blob has {len(raw_params)} bytes but the model needs {count_parameters(spec) * 4}"
        )
    net = Network(spec, seed=manifest.get("seed", 0))
    _unpack(raw_params, [p.values for p in net.parameters()], PARAMS)
    _unpack(raw_buffers, net.buffers(), BUFFERS)
    return net, manifest
