"""Fourier mode lattice and exterior-algebra bookkeeping for flat tori.

The real torus ``(R/2pi)^{2n}`` carries coordinates ``x_1, y_1, ..., x_n, y_n``
with ``z_j = x_j + i y_j``.  A mode ``k`` is an integer vector of length ``2n``
in the same order and stands for ``exp(i k.x)``.  Modes run over the box
``{-K..K}^{2n}`` in lexicographic order.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


class ModeLattice:
    """The box of Fourier modes ``|k|_inf <= K`` in ``2n`` real directions."""

    def __init__(self, n: int, K: int):
        self.n = int(n)
        self.K = int(K)
        self.side = 2 * self.K + 1
        self.modes = np.array(list(itertools.product(range(-self.K, self.K + 1), repeat=2 * self.n)),
                              dtype=np.int64).reshape(-1, 2 * self.n)
        self.size = len(self.modes)
        self.bands = np.max(np.abs(self.modes), axis=1) if self.size else np.zeros(0, int)
        self._weights = self.side ** np.arange(2 * self.n - 1, -1, -1)

    def index(self, k):
        """Indices of mode vectors ``k`` (shape ``(..., 2n)``); ``-1`` outside the box."""
        k = np.asarray(k, dtype=np.int64)
        inside = np.all(np.abs(k) <= self.K, axis=-1)
        idx = (k + self.K) @ self._weights
        return np.where(inside, idx, -1)

    def zero_index(self):
        return int(self.index(np.zeros(2 * self.n, dtype=np.int64)))

    def dz(self, j, k=None):
        """Symbol of ``d/dz_j`` on ``exp(i k.x)``: ``(i kx + ky) / 2``."""
        k = self.modes if k is None else np.asarray(k)
        return (1j * k[..., 2 * j] + k[..., 2 * j + 1]) / 2.0

    def dzbar(self, j, k=None):
        """Symbol of ``d/dzbar_j`` on ``exp(i k.x)``: ``(i kx - ky) / 2``."""
        k = self.modes if k is None else np.asarray(k)
        return (1j * k[..., 2 * j] - k[..., 2 * j + 1]) / 2.0

    def pairs(self, shift=None):
        """All mode pairs ``(m1, m2, m_out)`` with ``k1 + k2 (+ shift)`` inside the box."""
        key = None if shift is None else tuple(int(s) for s in shift)
        return _pairs(self.n, self.K, key)

    def as_grid(self, coeffs):
        """Reshape a coefficient vector over modes to a ``(2K+1,)*2n`` array."""
        return np.asarray(coeffs).reshape((self.side,) * (2 * self.n))


@lru_cache(maxsize=None)
def _pairs(n, K, shift):
    lat = ModeLattice(n, K)
    m1, m2 = np.meshgrid(np.arange(lat.size), np.arange(lat.size), indexing="ij")
    m1, m2 = m1.ravel(), m2.ravel()
    k = lat.modes[m1] + lat.modes[m2]
    if shift is not None:
        k = k + np.asarray(shift, dtype=np.int64)
    out = lat.index(k)
    keep = out >= 0
    res = (m1[keep], m2[keep], out[keep])
    for a in res:
        a.setflags(write=False)
    return res


@lru_cache(maxsize=None)
def subsets(n, q):
    """Increasing ``q``-subsets of ``range(n)`` in lexicographic order."""
    if q < 0 or q > n:
        return ()
    return tuple(itertools.combinations(range(n), q))


def permutation_sign(seq):
    """Sign of the permutation sorting ``seq`` (distinct entries)."""
    seq = list(seq)
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inv % 2 else 1


@lru_cache(maxsize=None)
def wedge(J1, J2):
    """``dzbar^J1 ^ dzbar^J2 = sign * dzbar^J``; returns ``(sign, J)`` or ``None``."""
    if set(J1) & set(J2):
        return None
    return permutation_sign(J1 + J2), tuple(sorted(J1 + J2))


def monomial_label(J):
    if not J:
        return "1"
    return "^".join(f"dzb{j + 1}" for j in J)
