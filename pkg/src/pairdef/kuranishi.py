"""Order-by-order solution of the Kuranishi equation and its obstruction map.

Given harmonic degree-1 seeds ``eta_1..eta_d`` the solver computes

    eps(t) = sum_j t_j eta_j - 1/2 dbar* G [eps(t), eps(t)]

in ``C[t] / (t)^(N+1)``.  Because the bracket has no constant term, the
order-``k`` coefficient only involves coefficients of order ``< k``, so one
pass over the orders gives the exact truncated solution.  The obstruction is
``H [eps, eps]`` expressed in the harmonic ``H^2`` basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dgla import AEForm, AESeriesForm, SectorDGLA
from .errors import (BandOverflowError, ConfigError, NotFirstOrderDeformation, ShapeError)
from .hodge import HodgeData, harmonic_basis_labels
from .models import SpectralModel
from .reports import FAIL, PASS, VACUOUS, CheckLine, Report
from .series import TruncatedSeries, graded_lex_key

COORD_DIGITS = 10


def gram_norm(m: SpectralModel, sector, q, v):
    """``sqrt(<v, v>)`` in the model's Gram pairing."""
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    return float(np.sqrt(max(np.real(v.conj() @ (m.gram_matrix(sector, q) @ v)), 0.0)))


def bracket_series(g: SectorDGLA, x: TruncatedSeries, y: TruncatedSeries, p=1, q=1):
    """Truncated bracket of two vector-valued series of degrees ``p`` and ``q``."""
    return x.bilinear(y, lambda a, b: g.bracket(p, q, a, b), shape=(g.dim(p + q),))


def solve_fixed_point(g: SectorDGLA, h: HodgeData, seed: TruncatedSeries,
                      allow_overflow: bool = False) -> TruncatedSeries:
    """Solve ``eps = seed - 1/2 dbar* G [eps, eps]`` order by order.

    Parameters
    ----------
    g : SectorDGLA
    h : HodgeData
    seed : TruncatedSeries
        Degree-1 vectors of the sector, without constant term.
    allow_overflow : bool
        Torus models raise :class:`BandOverflowError` when a bracket input pair
        exceeds the Fourier cutoff, unless this is set.

    Raises
    ------
    BandOverflowError
        ``order`` names the first order whose bracket leaves the mode box.
    """
    m = g.m
    if seed.shape != (g.dim(1),):
        raise ShapeError(f"seed coefficients must have shape ({g.dim(1)},)")
    zero = (0,) * seed.num_params
    if np.any(np.asarray(seed[zero]) != 0):
        raise ShapeError("the seed must not have a constant term")
    N = seed.max_degree
    eps, bands = {}, {}
    by_degree = {}
    for e, c in seed:
        by_degree.setdefault(sum(e), {})[e] = c
    correction = None
    if m.n >= 2:
        correction = -0.5 * (h.adjoint(g.sector, 1) @ h.G(g.sector, 2))
    K = m.band
    for k in range(1, N + 1):
        targets = dict(by_degree.get(k, {}))
        acc = {}
        if correction is not None and k >= 2:
            for ea, va in eps.items():
                for eb, vb in eps.items():
                    if sum(ea) + sum(eb) != k:
                        continue
                    if K is not None and not allow_overflow and bands[ea] + bands[eb] > K:
                        raise BandOverflowError(
                            f"order {k}: bracket of bands {bands[ea]} and {bands[eb]} exceeds "
                            f"the Fourier cutoff K={K}", order=k)
                    gam = tuple(a + b for a, b in zip(ea, eb))
                    br = g.bracket(1, 1, va, vb)
                    acc[gam] = acc[gam] + br if gam in acc else br
        for gam in sorted(set(targets) | set(acc), key=graded_lex_key):
            v = np.array(targets.get(gam, np.zeros(g.dim(1), dtype=complex)), dtype=complex)
            if gam in acc:
                v = v + correction @ acc[gam]
            eps[gam] = v
            bands[gam] = g.band_of(1, v)
    return TruncatedSeries(seed.num_params, N, eps, shape=(g.dim(1),))


@dataclass
class KuranishiSolution:
    """Solver output: seeds, the series ``eps(t)`` and the obstruction polynomials."""

    sector: str
    eta: np.ndarray
    epsilon_series: TruncatedSeries
    obstruction: list
    order: int
    directions: list = field(default_factory=list)
    h2_labels: list = field(default_factory=list)
    hodge: HodgeData | None = field(default=None, repr=False)

    @property
    def num_params(self):
        return self.epsilon_series.num_params

    @property
    def epsilon(self):
        """``eps(t)`` as an :class:`AESeriesForm` (sector ``A``) or a bare series."""
        if self.sector == "A":
            return AESeriesForm.from_stacked(self.hodge.model, 1, self.epsilon_series)
        return self.epsilon_series

    def linear_part(self):
        return TruncatedSeries.linear(list(self.eta), self.order) if len(self.eta) else \
            TruncatedSeries.zero(self.num_params, self.order, self.epsilon_series.shape)

    def obstruction_text(self, digits=COORD_DIGITS):
        return [p.format(digits) for p in self.obstruction]

    def to_json(self):
        return {
            "sector": self.sector,
            "order": self.order,
            "directions": list(self.directions),
            "eta": [{"re": v.real.tolist(), "im": v.imag.tolist()} for v in self.eta],
            "epsilon": (self.epsilon.to_json() if self.sector == "A"
                        else self.epsilon_series.to_json()),
            "obstruction": [{"h2_index": i, "label": (self.h2_labels[i] if i < len(self.h2_labels)
                                                      else ""),
                             "poly": p.to_json(), "text": p.format(COORD_DIGITS)}
                            for i, p in enumerate(self.obstruction)],
        }


def _round_series(s: TruncatedSeries, digits):
    return TruncatedSeries(s.num_params, s.max_degree,
                           {e: complex(round(c.real, digits), round(c.imag, digits))
                            for e, c in s}, shape=())


def select_directions(h: HodgeData, sector, directions):
    """Indices into the harmonic ``H^1`` basis: ``None``/``"all"`` or a list of ints."""
    dim = h.dim(sector, 1)
    if directions is None or directions == "all":
        return list(range(dim))
    idx = [int(d) for d in directions]
    for d in idx:
        if d < 0 or d >= dim:
            raise ConfigError(f"direction index {d} outside the H^1({sector}) basis of size {dim}")
    if len(set(idx)) != len(idx):
        raise ConfigError("direction indices must be distinct")
    return idx


def solve_kuranishi(m: SpectralModel, h: HodgeData, order: int, directions=None,
                    sector: str = "A", seed_vectors=None,
                    allow_overflow: bool = False) -> KuranishiSolution:
    """Solve the Kuranishi equation from harmonic seeds up to ``order``.

    ``directions`` selects basis elements of ``H^1``; ``seed_vectors`` instead
    supplies explicit harmonic degree-1 vectors (used by the diagram check).
    """
    if order < 1:
        raise ConfigError("the order N must be >= 1")
    g = SectorDGLA(m, sector)
    if seed_vectors is not None:
        eta = np.array([np.asarray(v, dtype=complex) for v in seed_vectors], dtype=complex)
        eta = eta.reshape(len(seed_vectors), g.dim(1))
        dirs = []
    else:
        dirs = select_directions(h, sector, directions)
        eta = h.basis(sector, 1)[dirs] if dirs else np.zeros((0, g.dim(1)), dtype=complex)
    d = max(len(eta), 1)
    if len(eta):
        seed = TruncatedSeries.linear(list(eta), order)
    else:
        seed = TruncatedSeries.zero(d, order, (g.dim(1),))
    eps = solve_fixed_point(g, h, seed, allow_overflow)
    sol = KuranishiSolution(sector, eta, eps, [], order, dirs,
                            harmonic_basis_labels(h, sector, 2) if m.n >= 2 else [], h)
    sol.obstruction = obstruction_map(m, h, sol)
    return sol


def obstruction_map(m: SpectralModel, h: HodgeData, sol: KuranishiSolution):
    """Coordinates of ``H [eps, eps]`` in the harmonic ``H^2`` basis, one series each."""
    if m.n < 2 or h.dim(sol.sector, 2) == 0:
        return []
    g = SectorDGLA(m, sol.sector)
    br = bracket_series(g, sol.epsilon_series, sol.epsilon_series)
    H2 = h.H(sol.sector, 2)
    piv = h.pivots(sol.sector, 2)
    coords = br.map(lambda v: (H2 @ v)[piv], shape=(len(piv),))
    out = []
    for i in range(len(piv)):
        s = coords.map(lambda v, i=i: v[i], shape=())
        out.append(_round_series(s, COORD_DIGITS + 2))
    return out


def _series_at(s: TruncatedSeries, t):
    return s.evaluate(t)


def mc_check(m: SpectralModel, sol: KuranishiSolution, t_point, tol: float = 1e-6) -> Report:
    """Compare the Maurer-Cartan residual and ``H [eps, eps]`` at a parameter point.

    The truncation budget is ``C |t|^(N+1)`` with ``C`` the summed Gram norm of
    the order-``N`` coefficients of ``eps`` and ``|t| = max_j |t_j|``.  The
    check passes when both norms lie below ``tol + budget`` or both lie above.
    """
    t = np.asarray(t_point, dtype=complex)
    if t.shape != (sol.num_params,):
        raise ShapeError(f"t_point needs {sol.num_params} entries")
    h = sol.hodge
    g = SectorDGLA(m, sol.sector)
    e = sol.epsilon_series.evaluate(t)
    br = g.bracket(1, 1, e, e)
    res = g.d(1, e) + 0.5 * br if m.n >= 2 else np.zeros(0, dtype=complex)
    harm = h.H(sol.sector, 2) @ br if m.n >= 2 else np.zeros(0, dtype=complex)
    mc_norm = gram_norm(m, sol.sector, 2, res)
    h_norm = gram_norm(m, sol.sector, 2, harm)
    N = sol.order
    C = sum(gram_norm(m, sol.sector, 1, c) for e_, c in sol.epsilon_series if sum(e_) == N)
    tmax = float(np.max(np.abs(t))) if t.size else 0.0
    budget = C * tmax ** (N + 1)
    thr = tol + budget
    small_mc, small_h = mc_norm < thr, h_norm < thr
    rep = Report("mc_check")
    rep.add(CheckLine("vanish together", PASS if small_mc == small_h else FAIL,
                      abs(mc_norm - h_norm) if small_mc != small_h else 0.0, thr,
                      f"|MC| {'<' if small_mc else '>='} threshold, "
                      f"|H[e,e]| {'<' if small_h else '>='} threshold"))
    rep.info.update({"t": [complex(v) for v in t], "mc_norm": mc_norm, "harmonic_norm": h_norm,
                     "budget": budget, "budget_constant": C, "threshold": thr,
                     "on_locus": bool(small_mc and small_h)})
    return rep


def completeness_check(m: SpectralModel, h: HodgeData, eps_prime, tol: float = 1e-10,
                       sector: str = "A") -> Report:
    """Check ``eps' = H eps' - 1/2 dbar* G [eps', eps']`` and uniqueness of the solution.

    ``eps_prime`` is an :class:`AESeriesForm` or a stacked series of the
    sector.  Inputs that are not coclosed or not Maurer-Cartan are reported as
    such and the identity is not asserted.
    """
    if isinstance(eps_prime, AESeriesForm):
        s = eps_prime.check(m).stacked()
        sector = "A"
    else:
        s = eps_prime
    g = SectorDGLA(m, sector)
    if s.shape != (g.dim(1),):
        raise ShapeError("eps_prime does not match the sector's degree-1 dimension")
    rep = Report("completeness_check")
    adj0 = h.adjoint(sector, 0)
    cocl = max((float(np.max(np.abs(adj0 @ c), initial=0.0)) for _, c in s), default=0.0)
    rep.add(CheckLine.measure("coclosed", cocl, tol, "" if cocl < tol else "not coclosed"))
    br = bracket_series(g, s, s)
    if m.n >= 2:
        D = m.dbar_matrix(sector, 1)
        mc = s.map(lambda v: D @ v, shape=(g.dim(2),)) + br.scale(0.5)
        mc_res = mc.max_norm()
    else:
        mc_res = 0.0
    skipped = []
    if cocl >= tol:
        skipped.append("not coclosed")
    if mc_res >= tol:
        rep.add(CheckLine.measure("maurer-cartan", mc_res, tol, "not MC"))
        skipped.append("not MC")
    else:
        rep.add(CheckLine.measure("maurer-cartan", mc_res, tol))
    if skipped:
        for name in ("identity", "uniqueness"):
            rep.add(CheckLine(name, VACUOUS, None, tol, "precondition failed: " + ", ".join(skipped)))
        rep.info["verdict"] = ", ".join(skipped)
        return rep
    H1 = h.H(sector, 1)
    hs = s.map(lambda v: H1 @ v, shape=(g.dim(1),))
    if m.n >= 2:
        corr = br.map(lambda v: -0.5 * (h.adjoint(sector, 1) @ (h.G(sector, 2) @ v)),
                      shape=(g.dim(1),))
        ident = s - hs - corr
    else:
        ident = s - hs
    rep.add(CheckLine.measure("identity", ident.max_norm(), tol))
    resolved = solve_fixed_point(g, h, hs, allow_overflow=True)
    rep.add(CheckLine.measure("uniqueness", (resolved - s).max_norm(), tol,
                              "re-solved from the harmonic part"))
    rep.info["verdict"] = "complete" if rep.passed else "identity violated"
    return rep


def first_order_class(m: SpectralModel, h: HodgeData, w, tol: float = 1e-10,
                      sector: str = "A", digits: int = COORD_DIGITS):
    """Harmonic ``H^1`` coordinates of a closed degree-1 form, rounded to ``digits``.

    Raises
    ------
    NotFirstOrderDeformation
        ``dbar w`` exceeds ``tol``.
    """
    v = w.check(m).vector() if isinstance(w, AEForm) else np.asarray(w, dtype=complex)
    if isinstance(w, AEForm) and w.degree != 1:
        raise ShapeError("first-order classes live in degree 1")
    if v.shape != (m.dim(sector, 1),):
        raise ShapeError(f"expected a degree-1 vector of length {m.dim(sector, 1)}")
    dw = m.dbar_matrix(sector, 1) @ v if m.n >= 2 else np.zeros(0)
    size = float(np.max(np.abs(dw), initial=0.0))
    if size > tol:
        raise NotFirstOrderDeformation(
            f"not a first-order deformation: |dbar w| = {size:.3e} exceeds {tol:.1e}")
    c = h.coordinates(sector, 1, v, digits)
    return np.where(c == 0, 0, c).astype(complex) + 0.0


def kuranishi_invariants(m: SpectralModel, sol: KuranishiSolution, tol: float = 1e-10) -> Report:
    """Linear term, coclosedness and fixed-point residual of a solution."""
    h = sol.hodge
    g = SectorDGLA(m, sol.sector)
    s = sol.epsilon_series
    rep = Report("kuranishi_invariants")
    lin = s.homogeneous(1)
    target = sol.linear_part().homogeneous(1) if len(sol.eta) else lin.scale(0)
    rep.add(CheckLine.measure("linear term", (lin - target).max_norm(), tol))
    adj0 = h.adjoint(sol.sector, 0)
    cocl = max((float(np.max(np.abs(adj0 @ c), initial=0.0)) for _, c in s), default=0.0)
    rep.add(CheckLine.measure("coclosed", cocl, tol))
    if m.n >= 2:
        br = bracket_series(g, s, s)
        corr = br.map(lambda v: -0.5 * (h.adjoint(sol.sector, 1) @ (h.G(sol.sector, 2) @ v)),
                      shape=(g.dim(1),))
        fixed = s - sol.linear_part() - corr if len(sol.eta) else s - corr
    else:
        fixed = s - sol.linear_part() if len(sol.eta) else s
    rep.add(CheckLine.measure("fixed point", fixed.max_norm(), tol))
    H1 = h.H(sol.sector, 1)
    hs = s.map(lambda v: H1 @ v, shape=(g.dim(1),))
    rep.add(CheckLine.measure("harmonic part", (hs - sol.linear_part()).max_norm()
                              if len(sol.eta) else hs.max_norm(), tol))
    resolved = solve_fixed_point(g, h, hs, allow_overflow=True)
    rep.add(CheckLine.measure("uniqueness", (resolved - s).max_norm(), tol,
                              "re-solved from the harmonic part"))
    return rep
