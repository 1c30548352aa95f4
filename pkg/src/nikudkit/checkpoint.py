"""Portable binary container for model weights.

Layout: 8-byte magic ``MNKB0001``, a little-endian uint32 header length,
a UTF-8 JSON header holding the format version, the model configuration
and an ordered tensor directory (name, shape, byte offset into the data
section), then the raw tensor data as little-endian float32.

Tensors are stored in sorted-name order, so identical models produce
byte-identical files.  Loading validates the directory against the shapes
implied by the embedded configuration.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .model import Model, ModelConfig, ShapeMismatch, param_shapes

MAGIC = b"MNKB0001"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


@dataclass
class Checkpoint:
    """In-memory form of the container."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]
    format_version: int = FORMAT_VERSION

    def to_model(self) -> Model:
        return Model(self.config, dict(self.tensors))


def save_checkpoint(model: Model, path: str):
    """Write the model to ``path``; float32, byte-exact, versioned."""
    names = sorted(model.params)
    directory = []
    blobs = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype="<f4")
        blob = arr.tobytes()
        directory.append({"name": name, "shape": list(arr.shape),
                          "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({
        "format_version": FORMAT_VERSION,
        "config": model.config.as_dict(),
        "tensors": directory,
    }, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def read_checkpoint(path: str) -> Checkpoint:
    """Parse and validate a container file.

    Raises OSError on I/O failure, BadMagic for a corrupt or truncated
    file, VersionMismatch for an unknown format version, and ShapeMismatch
    when the tensor directory disagrees with the embedded configuration.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 or raw[:len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_end = len(MAGIC) + 4 + header_len
    if len(raw) < header_end:
        raise BadMagic(f"{path}: truncated header")
    try:
        header = json.loads(raw[len(MAGIC) + 4:header_end].decode("utf-8"))
        version = header["format_version"]
        config_dict = header["config"]
        directory = header["tensors"]
    except (ValueError, KeyError, UnicodeDecodeError) as e:
        raise BadMagic(f"{path}: corrupt header ({e})") from None
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format_version {version}, expected {FORMAT_VERSION}")
    config = ModelConfig(**config_dict)
    expected = param_shapes(config)
    seen = {entry["name"] for entry in directory}
    if seen != set(expected):
        missing = sorted(set(expected) - seen)
        extra = sorted(seen - set(expected))
        raise ShapeMismatch(
            f"{path}: tensor directory mismatch (missing {missing}, extra {extra})")
    data = raw[header_end:]
    tensors: dict[str, np.ndarray] = {}
    for entry in directory:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if shape != expected[name]:
            raise ShapeMismatch(
                f"{path}: tensor {name} has shape {shape}, expected {expected[name]}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset < 0 or offset + nbytes > len(data):
            raise BadMagic(f"{path}: truncated tensor data for {name}")
        arr = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset)
        tensors[name] = arr.reshape(shape).astype(np.float32)
    return Checkpoint(config, tensors, version)


def load_checkpoint(path: str) -> Model:
    """Read a container and stand the model back up."""
    return read_checkpoint(path).to_model()
