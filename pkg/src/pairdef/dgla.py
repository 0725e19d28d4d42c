"""The Atiyah-extension DGLA ``Omega^{0,*}(Q + T)`` of a spectral model.

An element of degree ``q`` is a pair ``(A, phi)`` with ``A`` a ``Q``-valued
and ``phi`` a ``T``-valued ``(0,q)``-form.  The differential is

    dbar_A (A, phi) = (dbar A + B ^ phi, dbar phi),   B ^ phi = -(-1)^q phi -| F,

and the bracket of ``(A, phi)`` (degree p) with ``(B, psi)`` (degree q) is

    (L_phi B - (-1)^{pq} L_psi A + [A, B], [phi, psi]).

Vectors of the ``A`` sector stack the ``Q`` coordinates on top of the ``T``
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegreeOverflowError, ShapeError
from .models import SpectralModel, _Sampler, _Tracker
from .reports import VACUOUS, CheckLine, Report
from .series import TruncatedSeries


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AEForm:
    """``(A, phi)`` of degree ``degree`` with complex coefficient vectors."""

    degree: int
    a: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=complex))

    @classmethod
    def zero(cls, m, q):
        return cls(q, np.zeros(m.dim("Q", q), complex), np.zeros(m.dim("T", q), complex))

    @classmethod
    def from_vector(cls, m, q, v):
        v = np.asarray(v, dtype=complex)
        dq = m.dim("Q", q)
        if v.shape != (m.dim("A", q),):
            raise ShapeError(f"vector of length {v.shape} for A-sector degree {q}")
        return cls(q, v[:dq], v[dq:])

    def vector(self):
        return np.concatenate([self.a, self.phi])

    def check(self, m):
        if self.a.shape != (m.dim("Q", self.degree),) or self.phi.shape != (m.dim("T", self.degree),):
            raise ShapeError(f"form of degree {self.degree} has lengths "
                             f"({len(self.a)}, {len(self.phi)}), model expects "
                             f"({m.dim('Q', self.degree)}, {m.dim('T', self.degree)})")
        return self

    def __add__(self, other):
        if self.degree != other.degree:
            raise ShapeError("degrees differ")
        return AEForm(self.degree, self.a + other.a, self.phi + other.phi)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        return AEForm(self.degree, c * self.a, c * self.phi)

    def to_json(self):
        return {"degree": self.degree,
                "Q": [{"re": z.real, "im": z.imag} for z in self.a.tolist()],
                "T": [{"re": z.real, "im": z.imag} for z in self.phi.tolist()]}


@dataclass(frozen=True)
class AESeriesForm:
    """``(A_t, phi_t)``: both parts are vector-valued :class:`TruncatedSeries`."""

    degree: int
    a: TruncatedSeries
    phi: TruncatedSeries

    def __post_init__(self):
        if (self.a.num_params, self.a.max_degree) != (self.phi.num_params, self.phi.max_degree):
            raise ShapeError("A and phi parts use different parameter counts or orders")

    @property
    def num_params(self):
        return self.a.num_params

    @property
    def max_degree(self):
        return self.a.max_degree

    @classmethod
    def from_stacked(cls, m, q, series: TruncatedSeries):
        dq = m.dim("Q", q)
        if series.shape != (m.dim("A", q),):
            raise ShapeError(f"series coefficients of shape {series.shape} for degree {q}")
        return cls(q, series.map(lambda v: v[:dq], shape=(dq,)),
                   series.map(lambda v: v[dq:], shape=(m.dim("T", q),)))

    @classmethod
    def zero(cls, m, q, num_params, max_degree):
        return cls(q, TruncatedSeries.zero(num_params, max_degree, (m.dim("Q", q),)),
                   TruncatedSeries.zero(num_params, max_degree, (m.dim("T", q),)))

    def stacked(self):
        """One series with stacked ``(A, phi)`` coefficient vectors."""
        da, dp = self.a.shape[0], self.phi.shape[0]
        terms = {}
        for e in set(self.a.terms) | set(self.phi.terms):
            terms[e] = np.concatenate([self.a[e], self.phi[e]])
        return TruncatedSeries(self.num_params, self.max_degree, terms, shape=(da + dp,))

    def coefficient(self, exp):
        return AEForm(self.degree, self.a[exp], self.phi[exp])

    def evaluate(self, t):
        return AEForm(self.degree, self.a.evaluate(t), self.phi.evaluate(t))

    def check(self, m):
        if self.a.shape != (m.dim("Q", self.degree),) or self.phi.shape != (m.dim("T", self.degree),):
            raise ShapeError("series form does not match the model dimensions")
        return self

    def __add__(self, other):
        return AESeriesForm(self.degree, self.a + other.a, self.phi + other.phi)

    def __sub__(self, other):
        return AESeriesForm(self.degree, self.a - other.a, self.phi - other.phi)

    def max_norm(self):
        return max(self.a.max_norm(), self.phi.max_norm())

    def to_json(self):
        return {"degree": self.degree, "Q": self.a.to_json(), "T": self.phi.to_json()}


# ---------------------------------------------------------------------------
# vector-level operations
# ---------------------------------------------------------------------------
def ae_dbar_vec(m: SpectralModel, q, v):
    return m.dbar_a(q) @ v


def ae_bracket_vec(m: SpectralModel, p, q, x, y):
    """Bracket of stacked vectors of degrees ``p`` and ``q`` (``p + q <= n``)."""
    dp, dq = m.dim("Q", p), m.dim("Q", q)
    A, phi = x[:dp], x[dp:]
    B, psi = y[:dq], y[dq:]
    qpart = (m.conn10[(p, q)](phi, B) - (-1) ** (p * q) * m.conn10[(q, p)](psi, A)
             + m.bracket_q[(p, q)](A, B))
    return np.concatenate([qpart, m.bracket_t[(p, q)](phi, psi)])


class SectorDGLA:
    """One of the three DGLAs of a model: ``"Q"``, ``"T"`` or ``"A"``.

    The ``Q`` sector carries ``dbar_Q`` and the graded commutator, the ``T``
    sector carries ``dbar_T`` and the bracket of vector-valued forms, and
    ``"A"`` is the coupled Atiyah extension.
    """

    def __init__(self, m: SpectralModel, sector: str):
        if sector not in ("Q", "T", "A"):
            raise ConfigError(f"unknown sector {sector!r}")
        self.m, self.sector = m, sector

    @property
    def n(self):
        return self.m.n

    def dim(self, q):
        return self.m.dim(self.sector, q)

    def d(self, q, v):
        if q >= self.n:
            return np.zeros(0, dtype=complex)
        return self.m.dbar_matrix(self.sector, q) @ v

    def bracket(self, p, q, x, y):
        if p + q > self.n:
            return np.zeros(0, dtype=complex)
        if self.sector == "Q":
            return self.m.bracket_q[(p, q)](x, y)
        if self.sector == "T":
            return self.m.bracket_t[(p, q)](x, y)
        return ae_bracket_vec(self.m, p, q, x, y)

    def band_of(self, q, v):
        return self.m.band_of(self.sector, q, v)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------
def _overflow(m, q, clamp, what):
    if not clamp:
        raise DegreeOverflowError(f"{what} would produce degree {q} > n = {m.n}")


def dbar_ae(m: SpectralModel, w, clamp=False):
    """``dbar_A`` on an :class:`AEForm` or :class:`AESeriesForm`.

    With ``clamp=True`` a top-degree input returns the (zero-dimensional) zero
    form of degree ``n + 1`` instead of raising.
    """
    q = w.degree
    w.check(m)
    if q >= m.n:
        _overflow(m, q + 1, clamp, "dbar")
    if isinstance(w, AEForm):
        if q >= m.n:
            return AEForm.zero(m, q + 1)
        return AEForm.from_vector(m, q + 1, ae_dbar_vec(m, q, w.vector()))
    if q >= m.n:
        return AESeriesForm.zero(m, q + 1, w.num_params, w.max_degree)
    D = m.dbar_a(q)
    return AESeriesForm.from_stacked(m, q + 1, w.stacked().map(lambda v: D @ v,
                                                               shape=(m.dim("A", q + 1),)))


def bracket_ae(m: SpectralModel, w1, w2, clamp=False):
    """Bracket of two forms (scalar or series) of degrees ``p`` and ``q``."""
    p, q = w1.degree, w2.degree
    w1.check(m)
    w2.check(m)
    series = isinstance(w1, AESeriesForm)
    if series != isinstance(w2, AESeriesForm):
        raise ShapeError("cannot mix scalar and series forms")
    if p + q > m.n:
        _overflow(m, p + q, clamp, "bracket")
        if series:
            return AESeriesForm.zero(m, p + q, w1.num_params, w1.max_degree)
        return AEForm.zero(m, p + q)
    if not series:
        return AEForm.from_vector(m, p + q, ae_bracket_vec(m, p, q, w1.vector(), w2.vector()))
    out = w1.stacked().bilinear(w2.stacked(), lambda x, y: ae_bracket_vec(m, p, q, x, y),
                                shape=(m.dim("A", p + q),))
    return AESeriesForm.from_stacked(m, p + q, out)


def mc_residual(m: SpectralModel, e: AESeriesForm) -> AESeriesForm:
    """``dbar_A e + 1/2 [e, e]`` for a degree-1 series form."""
    if e.degree != 1:
        raise ShapeError("the Maurer-Cartan residual needs a degree-1 form")
    d = dbar_ae(m, e, clamp=True)
    b = bracket_ae(m, e, e, clamp=True)
    return AESeriesForm(2, d.a + b.a.scale(0.5), d.phi + b.phi.scale(0.5))


def dbar_t_square_residual(m: SpectralModel, A: TruncatedSeries, phi: TruncatedSeries):
    """The two components of the square of the deformed operator.

    Returns ``(dbar A + phi -| F + phi -| nabla A + 1/2 [A, A],
    dbar phi + 1/2 [phi, phi])`` computed directly from the curvature,
    connection and sector brackets.
    """
    if A.shape != (m.dim("Q", 1),) or phi.shape != (m.dim("T", 1),):
        raise ShapeError("A and phi must be degree-1 series of the model's dimensions")
    d, N = A.num_params, A.max_degree
    if (phi.num_params, phi.max_degree) != (d, N):
        raise ShapeError("A and phi use different parameter counts or orders")
    if m.n < 2:
        return (TruncatedSeries.zero(d, N, (m.dim("Q", 2),)),
                TruncatedSeries.zero(d, N, (m.dim("T", 2),)))
    DQ, DT, C = m.dbar_matrix("Q", 1), m.dbar_matrix("T", 1), m.curvature_matrix(1)
    dq2, dt2 = m.dim("Q", 2), m.dim("T", 2)
    qpart = (A.map(lambda v: DQ @ v, shape=(dq2,))
             + phi.map(lambda v: C @ v, shape=(dq2,))
             + phi.bilinear(A, m.conn10[(1, 1)], shape=(dq2,))
             + A.bilinear(A, m.bracket_q[(1, 1)], shape=(dq2,)).scale(0.5))
    tpart = (phi.map(lambda v: DT @ v, shape=(dt2,))
             + phi.bilinear(phi, m.bracket_t[(1, 1)], shape=(dt2,)).scale(0.5))
    return qpart, tpart


# ---------------------------------------------------------------------------
# axiom checks
# ---------------------------------------------------------------------------
def _norm(v):
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


def validate_dgla(m: SpectralModel, samples: int = 20, tol: float = 1e-10, seed: int = 0,
                  sample_band: int | None = None, sector: str = "A") -> Report:
    """Check the DGLA axioms on seeded band-limited samples.

    Lines ``dbar^2``, ``antisymmetry``, ``jacobi`` and ``leibniz`` carry the
    largest residual over admissible degree combinations; combinations whose
    total degree exceeds ``n`` are listed on separate vacuous lines.
    """
    if samples < 1 or tol <= 0:
        raise ConfigError("samples must be >= 1 and tol > 0")
    rng = np.random.default_rng(seed)
    S = _Sampler(m, rng, sample_band)
    g = SectorDGLA(m, sector)
    n = m.n
    fb = m.curvature_band if sector == "A" else 0
    tr = _Tracker(["dbar^2", "antisymmetry", "jacobi", "leibniz"])
    skipped = {"antisymmetry": 0, "jacobi": 0, "leibniz": 0}
    rng_deg = range(n + 1)
    for it in range(samples):
        for q in rng_deg:
            (b,), ov = S.bands(1)
            x = S.form(sector, q, b)
            if q + 2 <= n:
                tr.record("dbar^2", _norm(g.d(q + 1, g.d(q, x))), ov)
        for p in rng_deg:
            for q in rng_deg:
                (b1, b2), ov = S.bands(2)
                x, y = S.form(sector, p, b1), S.form(sector, q, b2)
                if p + q > n:
                    skipped["antisymmetry"] += it == 0
                    continue
                res = g.bracket(p, q, x, y) + (-1) ** (p * q) * g.bracket(q, p, y, x)
                tr.record("antisymmetry", _norm(res), ov)
        for p in rng_deg:
            for q in rng_deg:
                for s in rng_deg:
                    (b1, b2, b3), ov = S.bands(3)
                    x, y, z = (S.form(sector, p, b1), S.form(sector, q, b2),
                               S.form(sector, s, b3))
                    if p + q + s > n:
                        skipped["jacobi"] += it == 0
                        continue
                    res = (g.bracket(p, q + s, x, g.bracket(q, s, y, z))
                           - g.bracket(p + q, s, g.bracket(p, q, x, y), z)
                           - (-1) ** (p * q) * g.bracket(q, p + s, y, g.bracket(p, s, x, z)))
                    tr.record("jacobi", _norm(res), ov)
        for p in rng_deg:
            for q in rng_deg:
                (b1, b2), ov = S.bands(2, fb)
                x, y = S.form(sector, p, b1), S.form(sector, q, b2)
                if p + q + 1 > n:
                    skipped["leibniz"] += it == 0
                    continue
                res = (g.d(p + q, g.bracket(p, q, x, y))
                       - g.bracket(p + 1, q, g.d(p, x), y)
                       - (-1) ** p * g.bracket(p, q + 1, x, g.d(q, y)))
                tr.record("leibniz", _norm(res), ov)
    rep = Report("validate_dgla", tr.lines(tol))
    for name, count in skipped.items():
        if count:
            rep.add(CheckLine(f"{name} beyond top degree", VACUOUS, None, tol,
                              f"{count} degree combinations exceed n = {n}"))
    rep.info["sector"] = sector
    rep.info["samples"] = samples
    rep.info["seed"] = seed
    return rep


def random_series_form(m: SpectralModel, q, num_params, max_degree, rng, band=0,
                       density=1.0):
    """Random degree-``q`` series form with coefficients of band ``<= band``."""
    from .models import random_form
    from .series import monomials
    terms_a, terms_t = {}, {}
    for e in monomials(num_params, max_degree):
        va = random_form(m, "Q", q, band, rng)
        vt = random_form(m, "T", q, band, rng)
        if rng.random() < density:
            terms_a[e], terms_t[e] = va, vt
    return AESeriesForm(q, TruncatedSeries(num_params, max_degree, terms_a, shape=(m.dim("Q", q),)),
                        TruncatedSeries(num_params, max_degree, terms_t, shape=(m.dim("T", q),)))
