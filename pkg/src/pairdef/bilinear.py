"""Sparse bilinear maps stored as coordinate lists.

A :class:`Trilinear` holds entries ``(r, i, j, v)`` and evaluates
``out[r] += v * x[i] * y[j]``.  Torus models assemble these from a wedge
table, fiber structure constants and the list of mode pairs whose sum stays
inside the Fourier box; products that leave the box are truncated.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .fourier import subsets, wedge


class Trilinear:
    """Bilinear map ``C^{n1} x C^{n2} -> C^{n0}`` in coordinate format.

    Entries are coalesced (duplicates summed) and sorted, so two maps with the
    same action have identical arrays.
    """

    __slots__ = ("shape", "rows", "i", "j", "vals")

    def __init__(self, shape, rows=(), i=(), j=(), vals=(), coalesce=True):
        self.shape = tuple(int(s) for s in shape)
        rows = np.asarray(rows, dtype=np.int64).ravel()
        i = np.asarray(i, dtype=np.int64).ravel()
        j = np.asarray(j, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=complex).ravel()
        if not (len(rows) == len(i) == len(j) == len(vals)):
            raise ShapeError("coordinate arrays differ in length")
        for arr, bound, name in ((rows, self.shape[0], "row"), (i, self.shape[1], "i"),
                                 (j, self.shape[2], "j")):
            if len(arr) and (arr.min() < 0 or arr.max() >= bound):
                raise ShapeError(f"{name} index out of range for shape {self.shape}")
        if coalesce and len(vals):
            n1, n2 = max(self.shape[1], 1), max(self.shape[2], 1)
            key = (rows * n1 + i) * n2 + j
            uniq, inv = np.unique(key, return_inverse=True)
            acc = np.zeros(len(uniq), dtype=complex)
            np.add.at(acc, inv, vals)
            keep = acc != 0
            uniq, acc = uniq[keep], acc[keep]
            j = uniq % n2
            i = (uniq // n2) % n1
            rows = uniq // (n1 * n2)
            vals = acc
        self.rows, self.i, self.j, self.vals = rows, i, j, vals
        for arr in (self.rows, self.i, self.j, self.vals):
            arr.setflags(write=False)

    @classmethod
    def zeros(cls, shape):
        return cls(shape)

    @property
    def nnz(self):
        return len(self.vals)

    def __call__(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        if x.shape != (self.shape[1],) or y.shape != (self.shape[2],):
            raise ShapeError(f"bilinear map of shape {self.shape} got {x.shape}, {y.shape}")
        if self.nnz == 0 or self.shape[0] == 0:
            return np.zeros(self.shape[0], dtype=complex)
        w = self.vals * x[self.i] * y[self.j]
        return (np.bincount(self.rows, weights=w.real, minlength=self.shape[0])
                + 1j * np.bincount(self.rows, weights=w.imag, minlength=self.shape[0]))

    def contract_first(self, x):
        """Dense matrix of ``y -> self(x, y)``."""
        out = np.zeros((self.shape[0], self.shape[2]), dtype=complex)
        np.add.at(out, (self.rows, self.j), self.vals * np.asarray(x)[self.i])
        return out

    def to_dense(self):
        out = np.zeros(self.shape, dtype=complex)
        np.add.at(out, (self.rows, self.i, self.j), self.vals)
        return out

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=complex)
        r, i, j = np.nonzero(arr)
        return cls(arr.shape, r, i, j, arr[r, i, j])

    def scaled(self, c):
        return Trilinear(self.shape, self.rows, self.i, self.j, c * self.vals, coalesce=False)

    def __add__(self, other):
        if self.shape != other.shape:
            raise ShapeError("bilinear shapes differ")
        return Trilinear(self.shape, np.concatenate([self.rows, other.rows]),
                         np.concatenate([self.i, other.i]), np.concatenate([self.j, other.j]),
                         np.concatenate([self.vals, other.vals]))

    def __eq__(self, other):
        if not isinstance(other, Trilinear):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.i, other.i) and np.array_equal(self.j, other.j)
                and np.array_equal(self.vals, other.vals))

    __hash__ = None

    def __repr__(self):
        return f"Trilinear(shape={self.shape}, nnz={self.nnz})"


def form_dim(n, q, fib, M):
    return len(subsets(n, q)) * fib * M


def assemble(lattice, p, q, fib1, fib2, fib_out, terms, shift=None, out_degree=None):
    """Assemble a bilinear map between form spaces of a torus model.

    Parameters
    ----------
    lattice : ModeLattice
    p, q : int
        Form degrees of the two inputs.
    fib1, fib2, fib_out : int
        Fiber dimensions of the input and output sectors.
    terms : iterable of tuples ``(f1, f2, f_out, coef, deriv, order)``
        ``deriv`` is ``None`` or ``(side, direction)`` and multiplies by the
        ``d/dz_direction`` symbol of the first (``side=1``) or second input
        mode.  ``order`` is ``"xy"`` for ``dzbar^J1 ^ dzbar^J2`` and ``"yx"``
        for the reversed wedge.
    shift : array_like, optional
        Extra mode added to every output (multiplication by a fixed mode).
    out_degree : int, optional
        Output degree, ``p + q`` by default.
    """
    n, M = lattice.n, lattice.size
    out_degree = p + q if out_degree is None else out_degree
    J1s, J2s, Jos = subsets(n, p), subsets(n, q), subsets(n, out_degree)
    shape = (len(Jos) * fib_out * M, len(J1s) * fib1 * M, len(J2s) * fib2 * M)
    if min(shape) == 0:
        return Trilinear(shape)
    m1, m2, mo = lattice.pairs(shift)
    k1, k2 = lattice.modes[m1], lattice.modes[m2]
    jo_index = {J: a for a, J in enumerate(Jos)}
    rows, ii, jj, vals = [], [], [], []
    cache = {}
    for a, J1 in enumerate(J1s):
        for b, J2 in enumerate(J2s):
            for f1, f2, fo, coef, deriv, order in terms:
                w = wedge(J1, J2) if order == "xy" else wedge(J2, J1)
                if w is None or coef == 0:
                    continue
                sign, J = w
                if deriv is None:
                    factor = np.full(len(m1), sign * coef, dtype=complex)
                else:
                    side, direction = deriv
                    key = (side, direction)
                    if key not in cache:
                        cache[key] = lattice.dz(direction, k1 if side == 1 else k2)
                    factor = sign * coef * cache[key]
                nz = factor != 0
                rows.append((jo_index[J] * fib_out + fo) * M + mo[nz])
                ii.append((a * fib1 + f1) * M + m1[nz])
                jj.append((b * fib2 + f2) * M + m2[nz])
                vals.append(factor[nz])
    if not rows:
        return Trilinear(shape)
    return Trilinear(shape, np.concatenate(rows), np.concatenate(ii), np.concatenate(jj),
                     np.concatenate(vals))
