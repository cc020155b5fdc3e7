"""Single-file checkpoint format.

Layout (all integers little-endian)::

    8 bytes   magic  b"NILMCKPT"
    4 bytes   uint32 format version (currently 1)
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header, keys sorted
    rest      float64 little-endian payload, arrays back to back in C order

The header records the architecture, the Adam step counter, the layer list and,
for each stored array, its group (weights, buffers, adam_m, adam_v), name and
shape in payload order. Saving then loading reproduces every array bitwise.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import InputError
from .network import Architecture, ModelParams

MAGIC = b"NILMCKPT"
VERSION = 1
GROUPS = ("weights", "buffers", "adam_m", "adam_v")


def to_bytes(params: ModelParams, extra: dict | None = None) -> bytes:
    entries, chunks = [], []
    for group in GROUPS:
        for name, arr in getattr(params, group).items():
            entries.append({"group": group, "name": name, "shape": list(arr.shape)})
            chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    arch = params.arch
    header = {
        "format_version": VERSION,
        "architecture": {
            "width_scale": arch.width_scale,
            "encoder_channels": list(arch.encoder_channels),
            "pool_channels": arch.pool_channels,
            "decoder_channels": arch.decoder_channels,
        },
        "layers": [spec.name for spec in arch.layers()],
        "step": params.step,
        "arrays": entries,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<IQ", VERSION, len(blob)) + blob + b"".join(chunks)


def from_bytes(data: bytes) -> tuple[ModelParams, dict]:
    if data[:8] != MAGIC or len(data) < 20:
        raise InputError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise InputError(f"unsupported checkpoint version {version}")
    offset = 8 + 12
    header = json.loads(data[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    a = header["architecture"]
    arch = Architecture(float(a["width_scale"]), tuple(a["encoder_channels"]), a["pool_channels"], a["decoder_channels"])
    groups = {g: {} for g in GROUPS}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if offset + 8 * count > len(data):
            raise InputError("checkpoint payload is truncated")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
        groups[entry["group"]][entry["name"]] = arr
    if offset != len(data):
        raise InputError("checkpoint payload size does not match its header")
    params = ModelParams(arch, groups["weights"], groups["buffers"], groups["adam_m"], groups["adam_v"], header["step"])
    return params, header.get("extra", {})


def save_checkpoint(path, params: ModelParams, extra: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(params, extra))


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc}") from exc
    return from_bytes(data)
