"""Single-file model checkpoints.

Layout: the magic string ``KNM1``, a little-endian uint32 header
length, a JSON header (layer specs, creation seed, parameter manifest
of names and shapes, optional extras), then the raw little-endian
float64 payloads in manifest order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidDataError
from .layers import Network, layer_from_spec

MAGIC = b"KNM1"


@dataclass
class Checkpoint:
    net: Network
    seed: int
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, net: Network, seed: int, extra: dict | None = None) -> None:
    params = net.parameters()
    header = {
        "seed": int(seed),
        "layers": net.specs(),
        "params": [{"key": k, "shape": list(v.shape)} for k, v in params.items()],
        "extra": extra or {},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for key in params:
            fh.write(np.ascontiguousarray(params[key], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise InvalidDataError(f"{path}: not a {MAGIC.decode()} checkpoint")
    (header_len,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidDataError(f"{path}: corrupt checkpoint header: {exc}") from None

    net = Network([layer_from_spec(spec) for spec in header["layers"]])
    offset = 8 + header_len
    bundle = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise InvalidDataError(f"{path}: truncated parameter payload")
        bundle[entry["key"]] = np.frombuffer(
            raw[offset:end], dtype="<f8"
        ).reshape(shape)
        offset = end
    net.set_parameters(bundle)
    return Checkpoint(net=net, seed=header["seed"], extra=header.get("extra", {}))
