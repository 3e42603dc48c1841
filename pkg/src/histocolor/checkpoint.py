"""Binary codecs for trained models and dumped histogram fields.

Checkpoint layout (all integers little-endian):
  magic "HCLR" | version u32 | config length u32 | canonical config text
  | parameter count u32 | per parameter: name (u16 length + utf-8),
  rank u8, dims u32 each, values as IEEE-754 32-bit little-endian.
Parameters appear in declaration order.  The embedded config makes a
checkpoint self-describing: loading rebuilds the model skeleton from it
and then fills in the stored values (promoted to 64-bit).

Field dumps ("HFLD") store, after width/height/channel count, one header
per channel (name, bin count, bin-table spec string) followed by the
row-major per-pixel distributions at 32-bit width.  Rows are renormalized
on load so the result satisfies the histogram-field invariants despite
32-bit rounding.
"""

from __future__ import annotations

import struct

import numpy as np

from . import config as config_mod
from . import histo, net

CHECKPOINT_MAGIC = b"HCLR"
CHECKPOINT_VERSION = 1
FIELD_MAGIC = b"HFLD"
FIELD_VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated, or incompatible model/field file."""


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.path}: unexpected end of file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self, length: int) -> str:
        return self.take(length).decode("utf-8")


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def save_checkpoint(model: net.Model, cfg: config_mod.PipelineConfig, path) -> None:
    """Write model parameters plus the canonical pipeline config."""
    cfg_text = config_mod.canonical_text(cfg).encode("utf-8")
    params = model.parameters()
    blob = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<I", len(cfg_text)),
        cfg_text,
        struct.pack("<I", len(params)),
    ]
    for name, arr in params:
        blob.append(_pack_str(name))
        blob.append(struct.pack("<B", arr.ndim))
        blob.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        blob.append(np.asarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


def load_checkpoint(path) -> tuple[net.Model, config_mod.PipelineConfig]:
    """Rebuild a model (64-bit parameters) and its pipeline config."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    version = r.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    cfg = config_mod.parse_config(r.text(r.u32()))
    model = net.init_model(config_mod.build_net_config(cfg), seed=0)
    expected = model.parameters()
    count = r.u32()
    if count != len(expected):
        raise CheckpointError(
            f"{path}: has {count} parameters, config implies {len(expected)}"
        )
    for name, arr in expected:
        stored_name = r.text(r.u16())
        if stored_name != name:
            raise CheckpointError(
                f"{path}: parameter order mismatch: {stored_name!r} where "
                f"{name!r} was expected"
            )
        shape = tuple(r.u32() for _ in range(r.u8()))
        if shape != arr.shape:
            raise CheckpointError(
                f"{path}: parameter {name!r} has shape {shape}, "
                f"config implies {arr.shape}"
            )
        raw = r.take(4 * int(np.prod(shape, dtype=np.int64)))
        arr[...] = np.frombuffer(raw, dtype="<f4").reshape(shape)
    return model, cfg


def save_field(field: net.HistogramField, tables: dict, path) -> None:
    """Dump a histogram field with its bin-table specs."""
    names = list(field.channels)
    blob = [
        FIELD_MAGIC,
        struct.pack("<I", FIELD_VERSION),
        struct.pack("<III", field.width, field.height, len(names)),
    ]
    for name in names:
        arr = field.channels[name]
        blob.append(_pack_str(name))
        blob.append(struct.pack("<I", arr.shape[-1]))
        blob.append(_pack_str(tables[name].spec.serialize()))
    for name in names:
        blob.append(np.ascontiguousarray(field.channels[name], dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


def load_field(path) -> tuple[net.HistogramField, dict]:
    """Load a dumped field; per-pixel rows are renormalized to sum to 1."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    if r.take(4) != FIELD_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a field dump")
    version = r.u32()
    if version != FIELD_VERSION:
        raise CheckpointError(f"{path}: unsupported field version {version}")
    width, height, n_channels = struct.unpack("<III", r.take(12))
    headers = []
    for _ in range(n_channels):
        name = r.text(r.u16())
        k = r.u32()
        spec = histo.BinSpec.parse(r.text(r.u16()))
        headers.append((name, k, spec))
    channels = {}
    tables = {}
    for name, k, spec in headers:
        raw = r.take(4 * width * height * k)
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        arr = arr.reshape(height, width, k)
        sums = arr.sum(axis=-1, keepdims=True)
        if np.any(sums <= 0) or not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise CheckpointError(f"{path}: channel {name!r} holds invalid rows")
        channels[name] = arr / sums
        table = histo.build_bins(spec)
        if table.n_bins != k:
            raise CheckpointError(
                f"{path}: channel {name!r} bin count disagrees with its table spec"
            )
        tables[name] = table
    return net.HistogramField(channels), tables
