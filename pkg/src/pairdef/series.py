"""Truncated multivariate formal power series.

A :class:`TruncatedSeries` lives in ``C[t_1..t_d] / (t)^(N+1)``: every term of
total degree above ``N`` is discarded as soon as it is produced.  Coefficients
are complex scalars or, for form-valued series, complex vectors of a fixed
shape.  Values are immutable.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ParseError, ShapeError

PRUNE_TOL = 1e-14


def graded_lex_key(exp):
    """Sort key: total degree first, then lexicographic with ``t1`` leading."""
    return (sum(exp), tuple(-e for e in exp))


def monomials(num_params, max_degree):
    """All exponent tuples of total degree ``<= max_degree`` in graded-lex order."""
    out = []
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(num_params), deg):
            exp = [0] * num_params
            for i in combo:
                exp[i] += 1
            out.append(tuple(exp))
    out.sort(key=graded_lex_key)
    return out


def _negligible(c):
    if isinstance(c, np.ndarray):
        return c.size == 0 or float(np.max(np.abs(c))) < PRUNE_TOL
    return abs(c) < PRUNE_TOL


class TruncatedSeries:
    """Formal power series in ``num_params`` variables cut at total degree ``max_degree``.

    Parameters
    ----------
    num_params : int
        Number of deformation parameters ``d >= 1``.
    max_degree : int
        Truncation order ``N >= 0``.
    terms : mapping, optional
        Exponent tuple -> coefficient.  Terms above ``N`` are dropped and
        negligible coefficients (below ``1e-14``) are pruned.
    shape : tuple, optional
        Coefficient shape; ``()`` for scalar series.  Inferred from ``terms``
        when omitted.
    """

    __slots__ = ("num_params", "max_degree", "shape", "_terms")

    def __init__(self, num_params: int, max_degree: int,
                 terms: Mapping[tuple, object] | None = None, shape=None):
        if num_params < 1:
            raise ShapeError("num_params must be positive")
        if max_degree < 0:
            raise ShapeError("max_degree must be non-negative")
        self.num_params = int(num_params)
        self.max_degree = int(max_degree)
        clean = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.num_params or min(exp, default=0) < 0:
                raise ShapeError(f"bad exponent {exp} for {self.num_params} parameters")
            if sum(exp) > self.max_degree:
                continue
            if isinstance(c, np.ndarray) or isinstance(c, (list, tuple)):
                c = np.array(c, dtype=complex)
                if shape is None:
                    shape = c.shape
                elif c.shape != tuple(shape):
                    raise ShapeError(f"coefficient shape {c.shape} != {tuple(shape)}")
            else:
                c = complex(c)
                if shape is None:
                    shape = ()
                elif tuple(shape) != ():
                    raise ShapeError("scalar coefficient in a vector-valued series")
            if exp in clean:
                c = clean[exp] + c
            clean[exp] = c
        self.shape = tuple(shape) if shape is not None else ()
        self._terms = {}
        for exp in sorted(clean, key=graded_lex_key):
            c = clean[exp]
            if _negligible(c):
                continue
            if isinstance(c, np.ndarray):
                c.setflags(write=False)
            self._terms[exp] = c

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, num_params, max_degree, shape=()):
        return cls(num_params, max_degree, {}, shape=shape)

    @classmethod
    def constant(cls, num_params, max_degree, value):
        return cls(num_params, max_degree, {(0,) * num_params: value})

    @classmethod
    def variable(cls, num_params, max_degree, index, coefficient=1.0):
        """The series ``coefficient * t_{index+1}``."""
        exp = [0] * num_params
        exp[index] = 1
        return cls(num_params, max_degree, {tuple(exp): coefficient},
                   shape=np.shape(coefficient))

    @classmethod
    def linear(cls, vectors: Iterable[np.ndarray], max_degree: int):
        """``sum_j t_j v_j`` for a list of coefficient vectors."""
        vectors = [np.asarray(v, dtype=complex) for v in vectors]
        d = len(vectors)
        terms = {}
        for j, v in enumerate(vectors):
            exp = [0] * d
            exp[j] = 1
            terms[tuple(exp)] = v
        shape = vectors[0].shape if vectors else ()
        return cls(d, max_degree, terms, shape=shape)

    # access ---------------------------------------------------------------
    @property
    def terms(self):
        """Read-only view of the stored terms in graded-lex order."""
        return dict(self._terms)

    def __getitem__(self, exp):
        exp = tuple(exp)
        if exp in self._terms:
            return self._terms[exp]
        return np.zeros(self.shape, dtype=complex) if self.shape else 0j

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def is_zero(self, atol=0.0):
        return all(np.max(np.abs(c)) <= atol for c in self._terms.values())

    def homogeneous(self, degree):
        """Only the terms of total degree ``degree``."""
        return TruncatedSeries(self.num_params, self.max_degree,
                               {e: c for e, c in self._terms.items() if sum(e) == degree},
                               shape=self.shape)

    def truncate(self, max_degree):
        return TruncatedSeries(self.num_params, max_degree, self._terms, shape=self.shape)

    def max_norm(self):
        return max((float(np.max(np.abs(c))) for c in self._terms.values()), default=0.0)

    # arithmetic -----------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, TruncatedSeries):
            raise ShapeError("operand is not a TruncatedSeries")
        if (other.num_params, other.max_degree) != (self.num_params, self.max_degree):
            raise ShapeError(
                f"series shapes differ: (d={self.num_params}, N={self.max_degree}) vs "
                f"(d={other.num_params}, N={other.max_degree})")

    def combine(self, other, ca=1.0, cb=1.0):
        self._check(other)
        if self.shape != other.shape:
            raise ShapeError("coefficient shapes differ")
        terms = {e: ca * c for e, c in self._terms.items()}
        for e, c in other._terms.items():
            terms[e] = terms[e] + cb * c if e in terms else cb * c
        return TruncatedSeries(self.num_params, self.max_degree, terms, shape=self.shape)

    def __add__(self, other):
        return self.combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self.combine(other, 1.0, -1.0)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c):
        return TruncatedSeries(self.num_params, self.max_degree,
                               {e: c * v for e, v in self._terms.items()}, shape=self.shape)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return self.mul(other)
        return self.scale(other)

    __rmul__ = __mul__

    def mul(self, other):
        """Cauchy product of two scalar series, truncated at ``N``."""
        if self.shape or other.shape:
            raise ShapeError("mul needs scalar series; use bilinear for vector coefficients")
        return self.bilinear(other, lambda x, y: x * y, shape=())

    def bilinear(self, other, op: Callable, shape=None):
        """Convolve coefficients with a bilinear ``op(x, y)``; degrees above ``N`` dropped."""
        self._check(other)
        N = self.max_degree
        terms = {}
        for ea, ca in self._terms.items():
            da = sum(ea)
            for eb, cb in other._terms.items():
                if da + sum(eb) > N:
                    continue
                e = tuple(x + y for x, y in zip(ea, eb))
                v = op(ca, cb)
                terms[e] = terms[e] + v if e in terms else v
        if shape is None:
            shape = np.shape(next(iter(terms.values()))) if terms else ()
        return TruncatedSeries(self.num_params, N, terms, shape=shape)

    def map(self, fn: Callable, shape=None):
        """Apply a linear map coefficient-wise."""
        terms = {e: fn(c) for e, c in self._terms.items()}
        if shape is None:
            if terms:
                shape = np.shape(next(iter(terms.values())))
            else:
                shape = np.shape(fn(np.zeros(self.shape, dtype=complex))) if self.shape else ()
        return TruncatedSeries(self.num_params, self.max_degree, terms, shape=shape)

    def evaluate(self, t):
        """Sum the series at a point ``t`` (length ``num_params``)."""
        t = np.asarray(t, dtype=complex)
        if t.shape != (self.num_params,):
            raise ShapeError("evaluation point has the wrong length")
        out = np.zeros(self.shape, dtype=complex) if self.shape else 0j
        for e, c in self._terms.items():
            out = out + c * np.prod(t ** np.array(e))
        return out

    def allclose(self, other, atol=1e-12):
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return all(np.max(np.abs(np.asarray(self[k]) - np.asarray(other[k])), initial=0.0) <= atol
                   for k in keys)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        if (self.num_params, self.max_degree, self.shape) != (
                other.num_params, other.max_degree, other.shape):
            return False
        if self._terms.keys() != other._terms.keys():
            return False
        return all(np.array_equal(self._terms[k], other._terms[k]) for k in self._terms)

    __hash__ = None

    # text -----------------------------------------------------------------
    def format(self, digits=10, names=None):
        """Human-readable polynomial such as ``2·t1·t2``; scalar series only."""
        if self.shape:
            raise ShapeError("format() needs a scalar series")
        names = names or [f"t{i + 1}" for i in range(self.num_params)]
        parts = []
        for e, c in self._terms.items():
            coef = _format_number(c, digits)
            if coef is None:
                continue
            mono = [names[i] if p == 1 else f"{names[i]}^{p}" for i, p in enumerate(e) if p]
            if not mono:
                parts.append(coef)
            elif coef == "1":
                parts.append("·".join(mono))
            elif coef == "-1":
                parts.append("-" + "·".join(mono))
            else:
                parts.append("·".join([coef] + mono))
        if not parts:
            return "0"
        text = parts[0]
        for p in parts[1:]:
            text += " - " + p[1:] if p.startswith("-") else " + " + p
        return text

    def __repr__(self):
        if not self.shape:
            return f"TruncatedSeries(d={self.num_params}, N={self.max_degree}: {self.format()})"
        return (f"TruncatedSeries(d={self.num_params}, N={self.max_degree}, "
                f"shape={self.shape}, terms={len(self._terms)})")

    # serialization --------------------------------------------------------
    def to_json(self):
        terms = []
        for e, c in self._terms.items():
            if self.shape:
                flat = np.asarray(c).ravel()
                terms.append({"exp": list(e), "re": flat.real.tolist(), "im": flat.imag.tolist()})
            else:
                terms.append({"exp": list(e), "re": c.real, "im": c.imag})
        out = {"params": self.num_params, "degree": self.max_degree, "terms": terms}
        if self.shape:
            out["shape"] = list(self.shape)
        return out

    @classmethod
    def from_json(cls, obj, location="series"):
        try:
            d, N = obj["params"], obj["degree"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"missing field {exc}", location) from None
        shape = tuple(obj.get("shape", ()))
        if "terms" not in obj:
            raise ParseError("missing field 'terms'", location)
        terms = {}
        for i, t in enumerate(obj["terms"]):
            loc = f"{location}.terms[{i}]"
            try:
                e, re, im = tuple(t["exp"]), t["re"], t["im"]
            except (KeyError, TypeError) as exc:
                raise ParseError(f"missing field {exc}", loc) from None
            if shape:
                c = (np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)).reshape(shape)
            else:
                c = complex(re, im)
            terms[e] = c
        return cls(d, N, terms, shape=shape)


def _format_number(c, digits):
    c = complex(c)
    re, im = round(c.real, digits), round(c.imag, digits)
    re = 0.0 if re == 0 else re
    im = 0.0 if im == 0 else im
    if re == 0 and im == 0:
        return None

    def real_text(x):
        if float(x).is_integer():
            return str(int(x))
        return f"{x:.{digits}g}"

    if im == 0:
        return real_text(re)
    if re == 0:
        return real_text(im) + "i"
    sign = "+" if im > 0 else "-"
    return f"({real_text(re)}{sign}{real_text(abs(im))}i)"


def series_combine(a: TruncatedSeries, b: TruncatedSeries, ca=1.0, cb=1.0) -> TruncatedSeries:
    """``ca*a + cb*b`` with the shared truncation."""
    return a.combine(b, ca, cb)


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Truncated product of two scalar series."""
    if not isinstance(b, TruncatedSeries):
        raise ShapeError("operand is not a TruncatedSeries")
    return a.mul(b)


def num_monomials(num_params, max_degree):
    return math.comb(num_params + max_degree, max_degree)
