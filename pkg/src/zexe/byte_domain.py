"""Encoding between byte manipulations and real-valued perturbation vectors.

The optimizer works on points of ``R^d``. ``encode`` lifts a byte string to
reals, ``decode`` projects a real vector back onto a byte window by clamping
and flooring.
"""

from dataclasses import dataclass

import numpy as np

PRINTABLE = (32, 126)
FULL = (0, 255)


@dataclass(frozen=True)
class ByteWindow:
    """Inclusive byte range ``[lo, hi]`` that decoded bytes are confined to."""

    lo: int = PRINTABLE[0]
    hi: int = PRINTABLE[1]

    def __post_init__(self):
        if not (0 <= self.lo < self.hi <= 255):
            raise ValueError(f"invalid byte window [{self.lo}, {self.hi}]")

    @classmethod
    def printable(cls):
        return cls(*PRINTABLE)

    @classmethod
    def full(cls):
        return cls(*FULL)


def encode(data, d=None):
    """Map bytes to the real vector of their numeric values.

    Parameters
    ----------
    data : bytes-like or uint8 array
    d : int, optional
        Expected length; a mismatch raises ``ValueError``.
    """
    arr = np.frombuffer(bytes(data), dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    if d is not None and arr.shape[0] != d:
        raise ValueError(f"expected {d} bytes, got {arr.shape[0]}")
    return arr.astype(np.float64)


def decode_array(v, window):
    """Like :func:`decode` but returns a uint8 array (no copy to ``bytes``)."""
    v = np.asarray(v, dtype=np.float64)
    # a single sum is cheaper than isfinite over the array; NaN/inf propagate into it
    with np.errstate(over="ignore"):
        total = v.sum()
    if not np.isfinite(total):
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise ValueError(f"non-finite coordinate at index {bad[0]}: {v[bad[0]]!r}")
    # after clipping to a non-negative range, truncation toward zero is floor
    return np.clip(v, window.lo, window.hi).astype(np.uint8)


def decode(v, window):
    """Project a real vector onto ``window`` and emit one byte per coordinate.

    Each coordinate is clamped to ``[lo, hi]`` and floored, so ``hi`` itself
    is attainable and anything above ``hi`` maps to ``hi``.
    """
    return decode_array(v, window).tobytes()
