import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from zexe.byte_domain import ByteWindow, decode, decode_array, encode

PRINTABLE = ByteWindow.printable()
FULL = ByteWindow.full()


def test_encode_values():
    assert np.array_equal(encode(bytes([32, 126, 65])), [32.0, 126.0, 65.0])
    assert encode(bytes([1, 2]), d=2).dtype == np.float64


def test_encode_empty():
    assert encode(b"", d=0).shape == (0,)


def test_encode_length_mismatch():
    with pytest.raises(ValueError):
        encode(b"abc", d=4)


@pytest.mark.parametrize("x, expected", [(31.2, 32), (126.9, 126), (65.7, 65), (126.0, 126), (-1e300, 32), (1e300, 126)])
def test_decode_printable(x, expected):
    assert decode(np.array([x]), PRINTABLE) == bytes([expected])


def test_full_window_reaches_every_byte():
    v = np.arange(256) + 0.5
    assert decode(v, FULL) == bytes(range(256))
    assert decode(np.array([255.999, 256.0]), FULL) == b"\xff\xff"


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_decode_nonfinite_names_index(bad):
    v = np.full(5, 50.0)
    v[3] = bad
    with pytest.raises(ValueError, match="index 3"):
        decode(v, PRINTABLE)


def test_decode_huge_but_finite_sum_overflow():
    # the sum overflows to inf but every coordinate is finite
    v = np.array([1e308, 1e308, 40.0])
    assert decode(v, PRINTABLE) == bytes([126, 126, 40])


@pytest.mark.parametrize("lo, hi", [(5, 5), (10, 3), (-1, 10), (0, 256)])
def test_window_validation(lo, hi):
    with pytest.raises(ValueError):
        ByteWindow(lo, hi)


@settings(max_examples=200)
@given(st.binary(min_size=0, max_size=256).map(lambda b: bytes(32 + x % 95 for x in b)))
def test_roundtrip_within_window(data):
    assert decode(encode(data), PRINTABLE) == data


def test_roundtrip_many(rng):
    for _ in range(100):
        data = rng.integers(32, 127, size=100, dtype=np.uint8).tobytes()
        assert decode(encode(data), PRINTABLE) == data


finite = hnp.arrays(np.float64, st.integers(1, 64),
                    elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False))


@given(finite)
def test_decode_in_window(v):
    for w in (PRINTABLE, FULL, ByteWindow(10, 20)):
        out = decode_array(v, w)
        assert out.min() >= w.lo and out.max() <= w.hi


@given(finite)
def test_decode_idempotent_and_projection(v):
    once = decode(v, PRINTABLE)
    assert decode(encode(once), PRINTABLE) == once
    proj = encode(decode(v, PRINTABLE))
    assert np.array_equal(encode(decode(proj, PRINTABLE)), proj)


@given(finite)
def test_decode_matches_clamp_then_floor(v):
    expected = np.floor(np.clip(v, 32, 126)).astype(np.uint8)
    assert np.array_equal(decode_array(v, PRINTABLE), expected)
