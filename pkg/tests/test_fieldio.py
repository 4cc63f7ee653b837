import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swvortex.errors import FieldFormatError
from swvortex.fieldio import MAGIC, decode_field, encode_field, read_field, write_field
from swvortex.grid import Field, GridSpec, build_mask, square_mask
from swvortex.synthetic import random_field


def _bits(a: np.ndarray) -> np.ndarray:
    return a.view(np.uint64) if a.dtype == np.float64 else a.view(np.uint64).reshape(a.shape + (2,))


def test_header_layout():
    m = build_mask(GridSpec(extent=1.5, n=31), 1.2, [(0.1 + 0.2j, 0.45)], eps_floor=0)
    blob = encode_field(Field.constant(m, 1 + 2j))
    assert blob[:7] == b"VORTX1\n"
    version, kind, n, extent, R, count = struct.unpack_from("<IBIddI", blob, 7)
    assert (version, kind, n, extent, R, count) == (1, 1, 31, 1.5, 1.2, 1)
    assert struct.unpack_from("<ddd", blob, 7 + 29) == (0.1, 0.2, 0.45)
    assert len(blob) == 7 + 29 + 24 + 31 * 31 * 16


def test_round_trip_preserves_mask_and_nan_pattern(tmp_path):
    m = build_mask(GridSpec(extent=1.2, n=33), 1.0, [(0j, 0.2)])
    f = Field.sample(m, lambda z: np.exp(z))
    write_field(f, tmp_path / "f.vtx")
    g = read_field(tmp_path / "f.vtx")
    assert np.array_equal(_bits(g.data), _bits(f.data))
    assert g.mask.same_as(f.mask)


def test_wrong_magic():
    with pytest.raises(FieldFormatError, match="not a VORTX1 file"):
        decode_field(b"VORTX2\n" + bytes(100))


def test_truncated_payload():
    blob = encode_field(Field.constant(square_mask(GridSpec(extent=1.0, n=5)), 1.0))
    with pytest.raises(FieldFormatError, match="payload length"):
        decode_field(blob[:-3])


def test_unsupported_version():
    blob = bytearray(encode_field(Field.constant(square_mask(GridSpec(extent=1.0, n=5)), 1.0)))
    blob[len(MAGIC)] = 2
    with pytest.raises(FieldFormatError, match="unsupported version"):
        decode_field(bytes(blob))


def test_nan_payload_bits_survive():
    m = square_mask(GridSpec(extent=1.0, n=5))
    data = np.zeros((5, 5))
    odd = np.frombuffer(struct.pack("<Q", 0x7FF8_0000_DEAD_BEEF), dtype=np.float64)[0]
    data[2, 2] = odd
    g = decode_field(encode_field(Field(m, data)))
    assert g.data.view(np.uint64)[2, 2] == 0x7FF8_0000_DEAD_BEEF


@given(st.integers(0, 2 ** 32 - 1), st.booleans(), st.integers(3, 24))
def test_round_trip_random(seed, cplx, n):
    rng = np.random.default_rng(seed)
    m = square_mask(GridSpec(extent=float(rng.uniform(0.5, 10)), n=n))
    f = Field(m, random_field(rng, n, cplx))
    blob = encode_field(f)
    g = decode_field(blob)
    assert g.is_complex == cplx
    assert np.array_equal(_bits(g.data), _bits(f.data))
    assert encode_field(g) == blob
