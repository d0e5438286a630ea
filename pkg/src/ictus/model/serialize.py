"""Versioned binary weight container ("ICTW").

Layout, all little-endian:
  magic "ICTW" | u32 version | u16 fingerprint length + ASCII fingerprint |
  u32 spec JSON length + UTF-8 spec JSON | tensor section | buffer section.
Each section is a u32 count followed by entries of
  u16 name length + name | u8 dtype (0=f32, 1=f64) | u8 ndim | u32*ndim shape |
  raw array payload.
Float32 weights round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import (
    BadMagicError,
    FingerprintMismatchError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionUnsupportedError,
)
from .network import ArchitectureSpec, ModelParams, expected_shapes

_MAGIC = b"ICTW"
_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def _spec_json(spec: ArchitectureSpec) -> bytes:
    d = {
        "input_channels": spec.input_channels,
        "input_time": spec.input_time,
        "input_scales": spec.input_scales,
        "conv_filters": list(spec.conv_filters),
        "kernel_size": spec.kernel_size,
        "pool_after": list(spec.pool_after),
        "embed_dim": spec.embed_dim,
        "head": spec.head,
        "g_hidden": list(spec.g_hidden),
        "dropout_rate": spec.dropout_rate,
        "dtype": spec.dtype,
    }
    return json.dumps(d, sort_keys=True).encode()


def _spec_from_json(raw: bytes) -> ArchitectureSpec:
    d = json.loads(raw.decode())
    d["conv_filters"] = tuple(d["conv_filters"])
    d["pool_after"] = tuple(d["pool_after"])
    d["g_hidden"] = tuple(d["g_hidden"])
    return ArchitectureSpec(**d)


def _pack_section(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        code = 0 if arr.dtype == np.float32 else 1
        payload = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        parts.append(struct.pack("<H", len(name)) + name.encode())
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(payload)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"weight container ends at byte {len(self.data)}")
        out = self.data[self.pos: self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_section(r: _Reader) -> dict[str, np.ndarray]:
    (count,) = r.unpack("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode()
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise VersionUnsupportedError(f"unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I")
        dtype = _DTYPES[code]
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        out[name] = np.frombuffer(r.take(n_bytes), dtype=dtype).reshape(shape).copy()
    return out


def save_params(params: ModelParams) -> bytes:
    fp = params.fingerprint.encode()
    spec_json = _spec_json(params.spec)
    return b"".join([
        _MAGIC,
        struct.pack("<I", _VERSION),
        struct.pack("<H", len(fp)), fp,
        struct.pack("<I", len(spec_json)), spec_json,
        _pack_section(params.tensors),
        _pack_section(params.buffers),
    ])


def load_params(data: bytes) -> ModelParams:
    if len(data) < 4 or data[:4] != _MAGIC:
        raise BadMagicError("not an ICTW weight container")
    r = _Reader(data, 4)
    (version,) = r.unpack("<I")
    if version != _VERSION:
        raise VersionUnsupportedError(f"weight container version {version}")
    (fp_len,) = r.unpack("<H")
    fingerprint = r.take(fp_len).decode()
    (spec_len,) = r.unpack("<I")
    spec = _spec_from_json(r.take(spec_len))
    if fingerprint != spec.fingerprint():
        raise FingerprintMismatchError(
            f"container fingerprint {fingerprint} != architecture {spec.fingerprint()}"
        )
    tensors = _read_section(r)
    buffers = _read_section(r)
    want_tensors, want_buffers = expected_shapes(spec)
    for want, got, kind in ((want_tensors, tensors, "tensor"), (want_buffers, buffers, "buffer")):
        if set(want) != set(got):
            raise ShapeMismatchError(f"{kind} names do not match the architecture")
        for name, shape in want.items():
            if got[name].shape != shape:
                raise ShapeMismatchError(f"{kind} {name}: {got[name].shape} != {shape}")
    return ModelParams(spec=spec, tensors=tensors, buffers=buffers, fingerprint=fingerprint)
