"""Checkpoint persistence.

File layout (single file, bit-exact round trip):

    ANTIPHON-CKPT-V1 <header_bytes>\\n
    { json header: config, metadata, array manifest, payload crc32 }
    <raw little-endian float32 payload, arrays concatenated in manifest order>

The JSON header is human-readable with ``head -c``; the manifest pins
name, shape and byte offset of every weight array.  Loading validates
the CRC, the manifest against the config's expected shapes, and the
total scalar count against :func:`antiphon.network.param_count`.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .network import ModelConfig, Weights, expected_shapes, param_count

MAGIC = "ANTIPHON-CKPT-V1"
_DTYPE = "<f4"


@dataclass
class Checkpoint:
    config: ModelConfig
    weights: Weights
    metadata: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    arrays = ckpt.weights.arrays()
    manifest = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        blob = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        manifest.append(
            {"name": name, "shape": list(arr.shape), "dtype": _DTYPE, "offset": offset}
        )
        offset += len(blob)
        blobs.append(blob)
    payload = b"".join(blobs)
    header = {
        "config": ckpt.config.to_dict(),
        "metadata": ckpt.metadata,
        "arrays": manifest,
        "payload_bytes": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }
    # insertion order (config first) keeps the header readable; it is
    # deterministic, so save->load->save stays byte-identical
    header_bytes = json.dumps(header, indent=2).encode()
    with Path(path).open("wb") as fh:
        fh.write(f"{MAGIC} {len(header_bytes)}\n".encode())
        fh.write(header_bytes)
        fh.write(payload)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    with path.open("rb") as fh:
        first = fh.readline().decode(errors="replace").rstrip("\n")
        parts = first.split()
        if len(parts) != 2 or parts[0] != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic line)")
        try:
            header_len = int(parts[1])
        except ValueError:
            raise CheckpointError(f"{path}: malformed header length") from None
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise CheckpointError(f"{path}: truncated header")
        try:
            header = json.loads(header_bytes)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: corrupt header JSON ({exc})") from exc
        payload = fh.read()

    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(
            f"{path}: truncated payload ({len(payload)} of {header['payload_bytes']} bytes)"
        )
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")

    config = ModelConfig.from_dict(header["config"])
    want = expected_shapes(config)
    arrays: dict[str, np.ndarray] = {}
    total = 0
    for entry in header["arrays"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in want:
            raise CheckpointError(f"{path}: unexpected array {name!r} for this config")
        if shape != want[name]:
            raise CheckpointError(
                f"{path}: array {name!r} has shape {shape}, config wants {want[name]}"
            )
        size = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arrays[name] = (
            np.frombuffer(payload, dtype=entry["dtype"], count=size, offset=start)
            .reshape(shape)
            .copy()
        )
        total += size
    if set(arrays) != set(want):
        missing = sorted(set(want) - set(arrays))
        raise CheckpointError(f"{path}: missing arrays {missing}")
    if total != param_count(config):
        raise CheckpointError(
            f"{path}: {total} scalars stored but config implies {param_count(config)}"
        )
    weights = Weights.from_arrays(config, arrays)
    return Checkpoint(config=config, weights=weights, metadata=header.get("metadata", {}))
