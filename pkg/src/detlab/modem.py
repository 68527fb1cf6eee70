"""Gray-labelled BPSK / QPSK / 16-QAM mapping and hard-decision slicing.

Point ``i`` of every constellation carries the label whose bits, read MSB
first, spell ``i``.  Square constellations put the in-phase bits first.
Bit 0 on any axis means the positive half-plane, so BPSK is ``0 -> +1``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import LengthMismatch

NAMES = ("bpsk", "qpsk", "qam16")

# 2-bit Gray PAM: 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3
_PAM4 = {0b00: 3.0, 0b01: 1.0, 0b11: -1.0, 0b10: -3.0}


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray
    labels: np.ndarray  # (|A|, k) array of 0/1

    @property
    def bits_per_symbol(self):
        return self.labels.shape[1]

    @property
    def size(self):
        return self.points.size

    def __repr__(self):
        return f"Constellation({self.name!r}, size={self.size})"


def _labels(k):
    idx = np.arange(2**k)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)


@lru_cache(maxsize=None)
def get_constellation(name):
    """Return the named constellation (``"bpsk"``, ``"qpsk"`` or ``"qam16"``)."""
    key = name.lower()
    if key == "bpsk":
        points = np.array([1.0, -1.0], dtype=complex)
    elif key == "qpsk":
        axis = np.array([1.0, -1.0])
        points = (axis[:, None] + 1j * axis[None, :]).ravel() / np.sqrt(2.0)
    elif key in ("qam16", "16qam"):
        key = "qam16"
        axis = np.array([_PAM4[i] for i in range(4)])
        points = (axis[:, None] + 1j * axis[None, :]).ravel() / np.sqrt(10.0)
    else:
        raise ValueError(f"unknown constellation {name!r}; expected one of {NAMES}")
    labels = _labels(int(np.log2(points.size)))
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(key, points, labels)


def modulate(bits, c):
    """Map bits (last axis) to symbols, ``k`` bits per symbol."""
    bits = np.asarray(bits)
    k = c.bits_per_symbol
    if bits.shape[-1] % k:
        raise LengthMismatch(f"{bits.shape[-1]} bits is not a multiple of {k}")
    groups = bits.reshape(bits.shape[:-1] + (-1, k)).astype(np.int64)
    index = groups @ (1 << np.arange(k - 1, -1, -1))
    return c.points[index]


def slice_index(y, c):
    """Index of the nearest constellation point; ties go to the lowest index."""
    y = np.asarray(y, dtype=complex)
    d = np.abs(y[..., None] - c.points) ** 2
    return np.argmin(d, axis=-1)


def slice(y, c):
    """Nearest-point hard decision."""
    return c.points[slice_index(y, c)]


def demodulate(symbols, c):
    """Slice each symbol and emit its label bits along the last axis."""
    idx = slice_index(symbols, c)
    bits = c.labels[idx]
    return bits.reshape(idx.shape[:-1] + (-1,)) if idx.ndim else bits.reshape(-1)


def random_bits(rng, shape):
    return rng.integers(0, 2, size=shape, dtype=np.int8)
