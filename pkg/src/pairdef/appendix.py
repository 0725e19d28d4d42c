"""First-order differential operators ``D^1(E)`` and the isomorphism onto ``A(E)``.

An element of degree ``q`` is a ``(0,q)``-form with values in operators
``P = g + d``: ``g`` an endomorphism and ``d`` a vector field acting
componentwise in the global holomorphic frame of the torus.  The map

    Phi(g + d) = (g - d -| (hbar^{-1} d hbar), d)

identifies these with ``A(E)``; for ``h = e^u`` the correction is
``d -| du = sum_i d^i d_i u`` times the identity.

The bracket here is computed from pure tensors ``omega (x) P`` with
Fourier-mode coefficient forms and constant basis operators,

    [w (x) P, n (x) Q] = w ^ n (x) [P, Q] + w ^ L_{s(P)} n (x) Q
                         - (-1)^{|w||n|} n ^ L_{s(Q)} w (x) P,

with ``L_X w = i_X d w``, and products of coefficient functions taken by
direct convolution of mode grids.  It shares no tensor with the model's
bracket, so comparing the two through ``Phi`` is an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve

from .dgla import AEForm, ae_bracket_vec
from .errors import DegreeOverflowError, ShapeError, UnsupportedError
from .fourier import subsets, wedge
from .models import SpectralModel, _Sampler, gl_basis, gl_coordinates
from .reports import CheckLine, Report


@dataclass(frozen=True)
class D1Element:
    """``(0,q)``-form with values in ``D^1(E)``: symbol part ``d`` and endomorphism part ``g``."""

    degree: int
    symbol: np.ndarray
    endo: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "symbol", np.asarray(self.symbol, dtype=complex))
        object.__setattr__(self, "endo", np.asarray(self.endo, dtype=complex))

    def check(self, m):
        if (self.symbol.shape != (m.dim("T", self.degree),)
                or self.endo.shape != (m.dim("Q", self.degree),)):
            raise ShapeError("D1 element does not match the model dimensions")
        return self

    def __sub__(self, other):
        return D1Element(self.degree, self.symbol - other.symbol, self.endo - other.endo)


def _require_torus(m):
    if m.band is None:
        raise UnsupportedError("D^1(E) needs a torus model with a global frame")


def potential_contraction(m: SpectralModel, q: int) -> np.ndarray:
    """Matrix of ``d -> (d -| du) id`` from ``T_q`` to ``Q_q``."""
    _require_torus(m)
    key = ("potential_contraction", q)
    if key in m._cache:
        return m._cache[key]
    lat = m.lattice
    n, M, fq = m.n, lat.size, m.r * m.r
    Js = subsets(n, q)
    P = np.zeros((len(Js) * fq * M, len(Js) * n * M), dtype=complex)
    for mu, c in m.meta.get("potential", {}).items():
        target = lat.index(lat.modes + np.array(mu))
        ok = target >= 0
        for a in range(len(Js)):
            for i in range(n):
                rows = (a * fq + fq - 1) * M + target[ok]
                cols = (a * n + i) * M + np.arange(M)[ok]
                P[rows, cols] += lat.dz(i, np.array(mu)) * c
    P.setflags(write=False)
    m._cache[key] = P
    return P


def phi_iso(m: SpectralModel, p: D1Element) -> AEForm:
    """``Phi(g + d) = (g - d -| du, d)``."""
    _require_torus(m)
    p.check(m)
    P = potential_contraction(m, p.degree)
    return AEForm(p.degree, p.endo - P @ p.symbol, p.symbol.copy())


def phi_inverse(m: SpectralModel, w: AEForm) -> D1Element:
    """Inverse of :func:`phi_iso`."""
    _require_torus(m)
    w.check(m)
    P = potential_contraction(m, w.degree)
    return D1Element(w.degree, w.phi.copy(), w.a + P @ w.phi)


# ---------------------------------------------------------------------------
# bracket from pure tensors
# ---------------------------------------------------------------------------
class _Grids:
    """Mode-grid helpers for one model."""

    def __init__(self, m):
        self.m = m
        self.lat = m.lattice
        self.n, self.r, self.K = m.n, m.r, m.band
        self.M = self.lat.size
        self.shape = (2 * self.K + 1,) * (2 * self.n)
        self.dz = [self.lat.dz(i).reshape(self.shape) for i in range(self.n)]
        self.mats, _ = gl_basis(self.r)
        self.crop = tuple(slice(self.K, 3 * self.K + 1) for _ in range(2 * self.n))

    def mul(self, a, b):
        """Product of two band-limited functions, truncated to the box."""
        return convolve(a, b, mode="full", method="direct")[self.crop]

    def blocks(self, x: D1Element):
        """Pure-tensor decomposition: ``[(J, kind, index, grid)]``."""
        n, M, fq = self.n, self.M, self.r * self.r
        out = []
        for a, J in enumerate(subsets(n, x.degree)):
            for i in range(n):
                g = x.symbol[(a * n + i) * M:(a * n + i + 1) * M]
                if np.any(g != 0):
                    out.append((J, "d", i, g.reshape(self.shape)))
            for f in range(fq):
                g = x.endo[(a * fq + f) * M:(a * fq + f + 1) * M]
                if np.any(g != 0):
                    out.append((J, "g", f, g.reshape(self.shape)))
        return out


def bracket_d1(m: SpectralModel, x: D1Element, y: D1Element) -> D1Element:
    """Bracket of ``D^1(E)``-valued forms from the pure-tensor formula."""
    _require_torus(m)
    x.check(m)
    y.check(m)
    p, q = x.degree, y.degree
    n = m.n
    if p + q > n:
        raise DegreeOverflowError(f"bracket would produce degree {p + q} > n = {n}")
    gr = _Grids(m)
    fq, M = m.r * m.r, gr.M
    Jout = {J: a for a, J in enumerate(subsets(n, p + q))}
    sym = np.zeros((len(Jout), n) + gr.shape, dtype=complex)
    end = np.zeros((len(Jout), fq) + gr.shape, dtype=complex)
    comm = {}
    for f in range(fq):
        for g in range(fq):
            c = gl_coordinates(gr.mats, gr.mats[f] @ gr.mats[g] - gr.mats[g] @ gr.mats[f])
            comm[(f, g)] = np.where(np.abs(c) > 1e-14, c, 0)
    sgn = (-1) ** (p * q)

    def put(kind, index, J, val):
        target = sym if kind == "d" else end
        target[Jout[J], index] += val

    for J1, k1, i1, w in gr.blocks(x):
        for J2, k2, i2, eta in gr.blocks(y):
            # w ^ eta (x) [P, Q]: only two endomorphisms fail to commute
            wv = wedge(J1, J2)
            if wv is not None and k1 == "g" and k2 == "g":
                s, J = wv
                prod = gr.mul(w, eta)
                for h, c in enumerate(comm[(i1, i2)]):
                    if c != 0:
                        put("g", h, J, s * c * prod)
            # w ^ L_{s(P)} eta (x) Q
            if wv is not None and k1 == "d":
                s, J = wv
                put(k2, i2, J, s * gr.mul(w, gr.dz[i1] * eta))
            # -(-1)^{pq} eta ^ L_{s(Q)} w (x) P
            wv2 = wedge(J2, J1)
            if wv2 is not None and k2 == "d":
                s, J = wv2
                put(k1, i1, J, -sgn * s * gr.mul(eta, gr.dz[i2] * w))
    return D1Element(p + q, sym.reshape(-1), end.reshape(-1))


def bracket_d1_coordinates(m: SpectralModel, x: D1Element, y: D1Element) -> D1Element:
    """Same bracket from constant forms with function-coefficient operators.

    For ``P = g + d`` and ``P' = g' + d'`` the operator commutator is
    ``[g, g'] + d(g') - d'(g) + [d, d']``; constant forms contribute only
    their wedge product.
    """
    _require_torus(m)
    x.check(m)
    y.check(m)
    p, q = x.degree, y.degree
    n, r = m.n, m.r
    if p + q > n:
        raise DegreeOverflowError(f"bracket would produce degree {p + q} > n = {n}")
    gr = _Grids(m)
    M, fq = gr.M, r * r

    def operators(z):
        out = {}
        for a, J in enumerate(subsets(n, z.degree)):
            d = [z.symbol[(a * n + i) * M:(a * n + i + 1) * M].reshape(gr.shape) for i in range(n)]
            coeffs = z.endo[a * fq * M:(a + 1) * fq * M].reshape(fq, M)
            g = np.einsum("fab,fm->abm", gr.mats, coeffs).reshape((r, r) + gr.shape)
            out[J] = (g, d)
        return out

    def deriv(vec, fn):
        return sum(gr.mul(vec[i], gr.dz[i] * fn) for i in range(n))

    X, Y = operators(x), operators(y)
    Jout = {J: a for a, J in enumerate(subsets(n, p + q))}
    sym = np.zeros((len(Jout), n) + gr.shape, dtype=complex)
    gmat = np.zeros((len(Jout), r, r) + gr.shape, dtype=complex)
    for J1, (g1, d1) in X.items():
        for J2, (g2, d2) in Y.items():
            w = wedge(J1, J2)
            if w is None:
                continue
            s, J = w
            a = Jout[J]
            for i in range(r):
                for k in range(r):
                    acc = np.zeros(gr.shape, dtype=complex)
                    for j in range(r):
                        acc += gr.mul(g1[i, j], g2[j, k]) - gr.mul(g2[i, j], g1[j, k])
                    acc += deriv(d1, g2[i, k]) - deriv(d2, g1[i, k])
                    gmat[a, i, k] += s * acc
            for j in range(n):
                sym[a, j] += s * (deriv(d1, d2[j]) - deriv(d2, d1[j]))
    basis = gr.mats.reshape(fq, -1).T
    flat = gmat.reshape(len(Jout), r * r, -1)
    endo = np.linalg.solve(basis, flat.transpose(1, 0, 2).reshape(r * r, -1))
    endo = endo.reshape(fq, len(Jout), -1).transpose(1, 0, 2)
    return D1Element(p + q, sym.reshape(-1), endo.reshape(-1))


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------
def integer_element(m: SpectralModel, q: int, band: int, rng, high: int = 3) -> D1Element:
    """Element with small Gaussian-integer coefficients on modes of band ``<= band``.

    Integer data keep every product and sum exactly representable, so
    identities that hold exactly in the algebra give a residual of exactly 0
    whenever the metric potential vanishes.
    """
    def draw(sector):
        d = m.dim(sector, q)
        z = (rng.integers(-high, high + 1, d) + 1j * rng.integers(-high, high + 1, d)).astype(complex)
        z[m.basis_band(sector, q) > band] = 0
        return z
    return D1Element(q, draw("T"), draw("Q"))


def _norm(v):
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


def intertwiner_check(m: SpectralModel, samples: int = 50, tol: float = 1e-10,
                      seed: int = 0) -> Report:
    """Residual of ``Phi [x, y] - [Phi x, Phi y]`` over seeded band-limited pairs.

    Also reports the round trip ``Phi^{-1} Phi`` and the agreement of the
    pure-tensor bracket with the coordinate (operator commutator) bracket.
    """
    _require_torus(m)
    rng = np.random.default_rng(seed)
    S = _Sampler(m, rng)
    n = m.n
    pairs = [(p, q) for p in range(n + 1) for q in range(n + 1 - p)]
    worst = {"intertwiner": 0.0, "round trip": 0.0, "frame vs coordinate": 0.0}
    overflow = 0
    for k in range(samples):
        p, q = pairs[k % len(pairs)]
        (b1, b2), ov = S.bands(2, m.potential_band)
        if ov:
            overflow += 1
            continue
        x, y = integer_element(m, p, b1, rng), integer_element(m, q, b2, rng)
        lhs = phi_iso(m, bracket_d1(m, x, y))
        fx, fy = phi_iso(m, x), phi_iso(m, y)
        rhs = ae_bracket_vec(m, p, q, fx.vector(), fy.vector())
        worst["intertwiner"] = max(worst["intertwiner"], _norm(lhs.vector() - rhs))
        back = phi_inverse(m, fx) - x
        worst["round trip"] = max(worst["round trip"], _norm(back.symbol), _norm(back.endo))
        diff = bracket_d1(m, x, y) - bracket_d1_coordinates(m, x, y)
        worst["frame vs coordinate"] = max(worst["frame vs coordinate"],
                                           _norm(diff.symbol), _norm(diff.endo))
    rep = Report("intertwiner_check")
    for name, val in worst.items():
        rep.add(CheckLine.measure(name, val, tol))
    pot = m.meta.get("potential", {})
    rep.info["metric_potential"] = [{"k": list(k), "re": complex(c).real, "im": complex(c).imag}
                                    for k, c in pot.items()]
    rep.info["samples"] = samples
    rep.info["seed"] = seed
    rep.info["skipped_band_overflow"] = overflow
    rep.info["max_residual"] = worst["intertwiner"]
    return rep


def validate_d1(m: SpectralModel, samples: int = 10, tol: float = 1e-10, seed: int = 0) -> Report:
    """Graded antisymmetry and Jacobi for the ``D^1(E)`` bracket itself."""
    _require_torus(m)
    rng = np.random.default_rng(seed)
    S = _Sampler(m, rng)
    n = m.n
    anti, jac = 0.0, 0.0
    for _ in range(samples):
        for p in range(n + 1):
            for q in range(n + 1 - p):
                (b1, b2), _ = S.bands(2)
                x, y = integer_element(m, p, b1, rng), integer_element(m, q, b2, rng)
                d = bracket_d1(m, x, y)
                e = bracket_d1(m, y, x)
                s = (-1) ** (p * q)
                anti = max(anti, _norm(d.symbol + s * e.symbol), _norm(d.endo + s * e.endo))
        for p in range(n + 1):
            for q in range(n + 1 - p):
                for t in range(n + 1 - p - q):
                    (b1, b2, b3), _ = S.bands(3)
                    x, y, z = (integer_element(m, p, b1, rng), integer_element(m, q, b2, rng),
                               integer_element(m, t, b3, rng))
                    lhs = bracket_d1(m, x, bracket_d1(m, y, z))
                    r1 = bracket_d1(m, bracket_d1(m, x, y), z)
                    r2 = bracket_d1(m, y, bracket_d1(m, x, z))
                    s = (-1) ** (p * q)
                    jac = max(jac, _norm(lhs.symbol - r1.symbol - s * r2.symbol),
                              _norm(lhs.endo - r1.endo - s * r2.endo))
    rep = Report("validate_d1")
    rep.add(CheckLine.measure("antisymmetry", anti, tol))
    rep.add(CheckLine.measure("jacobi", jac, tol))
    return rep
