"""Binary field files.

Layout (all little-endian)::

    b"VORTX1\\n"                       7-byte magic
    uint32 version (=1)
    uint8  kind (0 real, 1 complex)
    uint32 n
    float64 extent
    float64 R (NaN for the full square)
    uint32 puncture count, then (re, im, radius) float64 triples
    payload: n*n float64 (real) or n*n*2 float64 (complex, re/im interleaved),
             row-major over [i, j]; NaN at nodes without data
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import FieldFormatError
from .grid import Field, GridSpec, build_mask

MAGIC = b"VORTX1\n"
VERSION = 1
_HEAD = struct.Struct("<IBIddI")
_PUNCT = struct.Struct("<ddd")


def encode_field(f: Field) -> bytes:
    mask = f.mask
    R = math.nan if mask.R is None else mask.R
    parts = [MAGIC, _HEAD.pack(VERSION, int(f.is_complex), mask.grid.n, mask.grid.extent, R, len(mask.punctures))]
    for c, eps in mask.punctures:
        parts.append(_PUNCT.pack(c.real, c.imag, eps))
    dtype = "<c16" if f.is_complex else "<f8"
    parts.append(np.ascontiguousarray(f.data, dtype=dtype).tobytes(order="C"))
    return b"".join(parts)


def decode_field(blob: bytes) -> Field:
    if not blob.startswith(MAGIC):
        raise FieldFormatError("not a VORTX1 file (bad magic)")
    off = len(MAGIC)
    if len(blob) < off + _HEAD.size:
        raise FieldFormatError("truncated header")
    version, kind, n, extent, R, count = _HEAD.unpack_from(blob, off)
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version} (expected {VERSION})")
    if kind not in (0, 1):
        raise FieldFormatError(f"unknown field kind {kind}")
    off += _HEAD.size
    if len(blob) < off + count * _PUNCT.size:
        raise FieldFormatError("truncated puncture list")
    punct = []
    for _ in range(count):
        re, im, eps = _PUNCT.unpack_from(blob, off)
        punct.append((complex(re, im), eps))
        off += _PUNCT.size
    width = 16 if kind else 8
    expected = n * n * width
    got = len(blob) - off
    if got != expected:
        raise FieldFormatError(f"payload length {got} bytes does not match expected {expected}")
    grid = GridSpec(extent=extent, n=n)
    mask = build_mask(grid, None if math.isnan(R) else R, punct, eps_floor=0.0)
    data = np.frombuffer(blob, dtype="<c16" if kind else "<f8", offset=off).reshape(n, n)
    return Field(mask, data)


def write_field(f: Field, path) -> None:
    Path(path).write_bytes(encode_field(f))


def read_field(path) -> Field:
    return decode_field(Path(path).read_bytes())
