"""Versioned binary container for trained models.

Layout::

    b"DAEMAMDL"                8-byte magic
    uint32 LE                  format version
    uint64 LE                  header length in bytes
    header                     UTF-8 JSON, sorted keys, no whitespace
    blobs                      little-endian float64, in header order

The header records the architecture tag, its dimensions, the name and shape
of every stored array, the feature names and the normalization mode. Arrays
are the model parameters followed by ``norm.mean`` and ``norm.scale`` when
normalization statistics are attached. Equal inputs give identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .baselines import DaeModel
from .errors import DimensionError, ModelFormatError
from .model import DaemaModel
from .pipeline import NormStats

MAGIC = b"DAEMAMDL"
VERSION = 1
ARCHS = {"daema": DaemaModel, "dae": DaeModel}


@dataclass
class SavedModel:
    model: object
    stats: NormStats | None = None
    feature_names: list[str] | None = None


def dumps(model, stats: NormStats | None = None, feature_names=None) -> bytes:
    arrays = list(zip(model.param_names, model.params()))
    if stats is not None:
        arrays += [("norm.mean", stats.mean), ("norm.scale", stats.scale)]
    header = {
        "arch": model.arch,
        "dims": model.dims,
        "arrays": [{"name": name, "shape": list(np.shape(a))} for name, a in arrays],
        "feature_names": None if feature_names is None else list(feature_names),
        "norm_mode": None if stats is None else stats.mode,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blobs = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + struct.pack("<IQ", VERSION, len(head)) + head + blobs


def loads(data: bytes) -> SavedModel:
    if data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a model file (bad magic header)")
    offset = len(MAGIC)
    try:
        version, head_len = struct.unpack_from("<IQ", data, offset)
    except struct.error:
        raise ModelFormatError("truncated model header") from None
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    offset += struct.calcsize("<IQ")
    try:
        header = json.loads(data[offset:offset + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from None
    offset += head_len

    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(data):
            raise ModelFormatError(f"model file truncated inside array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after the last array")

    cls = ARCHS.get(header["arch"])
    if cls is None:
        raise ModelFormatError(f"unknown architecture {header['arch']!r}")
    try:
        model = cls.from_params(header["dims"], [arrays[name] for name in cls.param_names])
    except KeyError as exc:
        raise ModelFormatError(f"missing parameter {exc.args[0]!r}") from None
    except DimensionError as exc:
        raise ModelFormatError(f"inconsistent parameter shapes: {exc}") from None
    stats = None
    if "norm.mean" in arrays:
        stats = NormStats(arrays["norm.mean"], arrays["norm.scale"], header["norm_mode"])
    return SavedModel(model, stats, header["feature_names"])


def save_model(path, model, stats: NormStats | None = None, feature_names=None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(model, stats, feature_names))


def load_model(path) -> SavedModel:
    with open(path, "rb") as fh:
        return loads(fh.read())
