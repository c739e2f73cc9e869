"""Counter-based deterministic random streams.

Every random decision in this package flows through one 64-bit master seed.
Substreams are derived per (stage, element) with the splitmix64 finalizer, so
draws for batch element ``i`` of pipeline stage ``k`` are a pure function of
``(seed, k, i, draw_index)``.  That makes plans reproducible bit-for-bit across
runs, worker counts, and process boundaries.

All helpers operate on ``numpy.uint64`` arrays; unsigned overflow wraps mod
2**64, which is exactly the arithmetic splitmix64 wants.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_STAGE_SALT = _U64(0xD1B54A32D192ED03)
_ELEM_SALT = _U64(0x8CB92BA72F3D8DD7)
_S30 = _U64(30)
_S27 = _U64(27)
_S31 = _U64(31)
_S11 = _U64(11)
_ONE = _U64(1)

# (x >> 11) yields 53 random bits; scale to [0, 1).
_INV_2_53 = float(2.0**-53)


def mix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; accepts scalars or uint64 arrays."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        z = z ^ (z >> _S31)
    return z


def _keys(seed: int, stage: int, elements: np.ndarray) -> np.ndarray:
    """Derive one substream key per element index."""
    e = np.asarray(elements, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = mix64(_U64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        h = mix64(h ^ ((_U64(stage) + _ONE) * _STAGE_SALT))
        h = mix64(h ^ ((e + _ONE) * _ELEM_SALT))
    return h


class SubStream:
    """Deterministic draw source for a block of elements.

    Holds one key per element; draw ``j`` of element ``i`` is
    ``mix64(key[i] + (j + 1) * GOLDEN)``.  A shared cursor advances by the
    number of draws consumed, so repeated calls yield fresh values while the
    whole sequence stays a pure function of the key.
    """

    def __init__(self, keys: np.ndarray):
        self._keys = np.atleast_1d(keys).astype(np.uint64)
        self._cursor = 0

    @property
    def n_elements(self) -> int:
        return self._keys.shape[0]

    def raw(self, draws: int = 1) -> np.ndarray:
        """Next ``draws`` uint64 words per element, shape (n_elements, draws)."""
        idx = np.arange(self._cursor + 1, self._cursor + draws + 1, dtype=np.uint64)
        self._cursor += draws
        with np.errstate(over="ignore"):
            return mix64(self._keys[:, None] + idx[None, :] * _GOLDEN)

    def uniform(self, draws: int = 1) -> np.ndarray:
        """Uniform floats in [0, 1), shape (n_elements, draws)."""
        return ((self.raw(draws) >> _S11)).astype(np.float64) * _INV_2_53

    def uniform1(self) -> np.ndarray:
        """One uniform per element, shape (n_elements,)."""
        return self.uniform(1)[:, 0]

    def integers(self, n: int | np.ndarray) -> np.ndarray:
        """One integer per element, uniform on [0, n); n may vary per element."""
        n = np.asarray(n, dtype=np.int64)
        if np.any(n <= 0):
            raise ValueError("integers() requires n >= 1")
        return np.minimum((self.uniform1() * n).astype(np.int64), n - 1)

    def normal(self, draws: int = 1) -> np.ndarray:
        """Standard normals via the inverse CDF, shape (n_elements, draws)."""
        u = ((self.raw(draws) >> _S11).astype(np.float64) + 0.5) * _INV_2_53
        return ndtri(u)


class RngStream:
    """Master seed plus the substream derivation used package-wide."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def substream(self, stage: int, n_elements: int) -> SubStream:
        """Independent streams for elements 0..n_elements-1 of one stage."""
        return SubStream(_keys(self.seed, stage, np.arange(n_elements)))

    def single(self, stage: int, element: int = 0) -> SubStream:
        """Stream for one (stage, element) pair."""
        return SubStream(_keys(self.seed, stage, np.asarray([element])))

    def fold(self, stage: int, element: int = 0) -> int:
        """Derive a child seed, for handing a whole subsystem its own root."""
        return int(_keys(self.seed, stage, np.asarray([element]))[0])
