"""The long exact sequence of the Atiyah extension ``0 -> Q -> A -> T -> 0``.

In harmonic coordinates the maps are

* ``iota*_q [A] = [H (A, 0)]``,
* ``pi*_q [(A, phi)] = [H phi]``,
* ``delta_q [phi] = [H (phi -| F)]``,

and the sequence ``0 -> H^0(Q) -> H^0(A) -> H^0(T) -> H^1(Q) -> ... -> H^n(T) -> 0``
is checked node by node through ranks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleBasesError, ShapeError
from .hodge import HodgeData
from .kuranishi import KuranishiSolution, solve_kuranishi
from .models import SpectralModel
from .reports import FAIL, PASS, VACUOUS, CheckLine, Report

RANK_TOL = 1e-8


def _rank(a, rel=RANK_TOL):
    a = np.asarray(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > rel * max(1.0, s[0])))


def _mnorm(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass
class LESData:
    """Matrices of ``iota*``, ``pi*`` and ``delta`` in the harmonic bases, per degree."""

    n: int
    dims: dict
    iota: dict
    pi: dict
    delta: dict

    def sequence(self):
        """Nodes and maps in order: ``[(node, dim)]`` and ``[(name, matrix)]``."""
        nodes, maps = [], []
        for q in range(self.n + 1):
            for s in ("Q", "A", "T"):
                nodes.append((f"H^{q}({s})", self.dims[(s, q)]))
            maps.append((f"iota*_{q}", self.iota[q]))
            maps.append((f"pi*_{q}", self.pi[q]))
            if q < self.n:
                maps.append((f"delta_{q}", self.delta[q]))
        return nodes, maps

    def to_json(self):
        enc = lambda a: {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}
        return {"n": self.n,
                "dims": [{"sector": s, "q": q, "dim": d} for (s, q), d in sorted(self.dims.items())],
                "iota": {str(q): enc(a) for q, a in self.iota.items()},
                "pi": {str(q): enc(a) for q, a in self.pi.items()},
                "delta": {str(q): enc(a) for q, a in self.delta.items()}}


def les_maps(m: SpectralModel, h: HodgeData) -> LESData:
    """Harmonic-coordinate matrices of the three maps of the sequence."""
    n = m.n
    dims = {(s, q): h.dim(s, q) for s in ("Q", "A", "T") for q in range(n + 1)}
    iota, pi, delta = {}, {}, {}
    for q in range(n + 1):
        dq, dt = m.dim("Q", q), m.dim("T", q)
        xi = h.basis("Q", q)
        cols = [h.coordinates("A", q, np.concatenate([v, np.zeros(dt, complex)])) for v in xi]
        iota[q] = np.array(cols).T.reshape(dims[("A", q)], len(xi))
        eta = h.basis("A", q)
        cols = [h.coordinates("T", q, v[dq:]) for v in eta]
        pi[q] = np.array(cols).T.reshape(dims[("T", q)], len(eta))
        if q < n:
            psi = h.basis("T", q)
            C = m.curvature_matrix(q)
            cols = [h.coordinates("Q", q + 1, C @ v) for v in psi]
            delta[q] = np.array(cols).T.reshape(dims[("Q", q + 1)], len(psi))
    return LESData(n, dims, iota, pi, delta)


def exactness_check(les: LESData, tol: float = 1e-10) -> Report:
    """Image equals kernel at every node, by ranks, plus ``outgoing o incoming = 0``.

    The report's ``nodes`` info lists ``{"node", "rank_in", "dim_ker", "residual"}``.
    """
    nodes, maps = les.sequence()
    rep = Report("exactness_check")
    rows = []
    for k, (name, dim) in enumerate(nodes):
        f = maps[k - 1][1] if k > 0 else None
        g = maps[k][1] if k < len(maps) else None
        rank_in = _rank(f) if f is not None else 0
        rank_out = _rank(g) if g is not None else 0
        dim_ker = dim - rank_out
        residual = _mnorm(g @ f) if f is not None and g is not None else 0.0
        ok = rank_in == dim_ker and residual < tol
        detail = f"rank_in={rank_in} dim_ker={dim_ker}"
        rep.add(CheckLine(name, PASS if ok else FAIL, residual, tol, detail))
        rows.append({"node": name, "rank_in": rank_in, "dim_ker": dim_ker, "residual": residual})
    euler = sum((-1) ** k * d for k, (_, d) in enumerate(nodes))
    rep.add(CheckLine("alternating sum", PASS if euler == 0 else FAIL, float(abs(euler)), 0.5,
                      "sum of (-1)^k dim over the sequence"))
    for q in range(les.n + 1):
        comp = les.pi[q] @ les.iota[q]
        rep.add(CheckLine.measure(f"pi*_{q} iota*_{q}", _mnorm(comp), tol))
    rep.info["nodes"] = rows
    return rep


def well_definedness_check(m: SpectralModel, h: HodgeData, les: LESData, samples: int = 5,
                           tol: float = 1e-10, seed: int = 0) -> Report:
    """Adding exact forms to representatives leaves every map unchanged."""
    rng = np.random.default_rng(seed)
    n = m.n
    worst = {"iota*": 0.0, "pi*": 0.0, "delta": 0.0}

    def rnd(sector, q):
        d = m.dim(sector, q)
        return rng.standard_normal(d) + 1j * rng.standard_normal(d)

    for _ in range(samples):
        for q in range(1, n + 1):
            dq, dt = m.dim("Q", q), m.dim("T", q)
            for j, xi in enumerate(h.basis("Q", q)):
                w = xi + m.dbar_matrix("Q", q - 1) @ rnd("Q", q - 1)
                c = h.coordinates("A", q, np.concatenate([w, np.zeros(dt, complex)]))
                worst["iota*"] = max(worst["iota*"], _mnorm(c - les.iota[q][:, j]))
            for j, eta in enumerate(h.basis("A", q)):
                w = eta + m.dbar_matrix("A", q - 1) @ rnd("A", q - 1)
                c = h.coordinates("T", q, w[dq:])
                worst["pi*"] = max(worst["pi*"], _mnorm(c - les.pi[q][:, j]))
            if q < n:
                for j, psi in enumerate(h.basis("T", q)):
                    w = psi + m.dbar_matrix("T", q - 1) @ rnd("T", q - 1)
                    c = h.coordinates("Q", q + 1, m.curvature_matrix(q) @ w)
                    worst["delta"] = max(worst["delta"], _mnorm(c - les.delta[q][:, j]))
    rep = Report("well_definedness")
    for k, v in worst.items():
        rep.add(CheckLine.measure(k, v, tol))
    return rep


def trace_free_check(m: SpectralModel, h: HodgeData, sol_q: KuranishiSolution,
                     tol: float = 1e-10) -> Report:
    """The ``Q``-sector obstruction has no component along the identity endomorphism."""
    rep = Report("trace_free")
    if sol_q.sector != "Q":
        raise ShapeError("trace-free check needs a Q-sector solution")
    if m.band is None or m.n < 2:
        rep.add(CheckLine("trace component", VACUOUS, None, tol,
                          "needs a torus model with n >= 2"))
        return rep
    labels = m.basis_labels("Q", 2)
    piv = h.pivots("Q", 2)
    worst = 0.0
    for i, p in enumerate(piv):
        if labels[p].startswith("id*"):
            worst = max(worst, sol_q.obstruction[i].max_norm())
    rep.add(CheckLine.measure("trace component", worst, tol))
    return rep


def unobstructed_criterion(m: SpectralModel, h: HodgeData, les: LESData, order: int = 4,
                           sol_t: KuranishiSolution | None = None, tol: float = 1e-10,
                           sol_ae: KuranishiSolution | None = None) -> Report:
    """Surjectivity of ``delta_1`` plus a vanishing tangent obstruction on ``pi*(H^1(A))``.

    Both hypotheses together force the pair's obstruction to vanish; that
    consequence is checked against a direct solve over all ``H^1(A)``
    directions.  The criterion is sufficient, not necessary.
    """
    rep = Report("unobstructed_criterion")
    h2q = les.dims.get(("Q", 2), 0)
    rank = _rank(les.delta[1]) if m.n >= 2 else 0
    surj = rank == h2q
    rep.add(CheckLine("delta_1 surjective", "holds" if surj else "fails", float(h2q - rank),
                      None, f"rank {rank} onto H^2(Q) of dim {h2q}"))
    dq = m.dim("Q", 1)
    seeds = [h.H("T", 1) @ eta[dq:] for eta in h.basis("A", 1)]
    seeds = [s for s in seeds]
    if sol_t is None:
        if seeds:
            sol_t = solve_kuranishi(m, h, order, sector="T", seed_vectors=seeds)
        else:
            sol_t = solve_kuranishi(m, h, order, sector="T", directions=[])
    elif sol_t.sector != "T":
        raise ShapeError("sol_t must be a T-sector solution")
    t_obs = max((p.max_norm() for p in sol_t.obstruction), default=0.0)
    t_zero = t_obs < tol
    rep.add(CheckLine("tangent obstruction on pi*(H^1(A)) vanishes",
                      "holds" if t_zero else "fails", t_obs, tol))
    if sol_ae is None:
        sol_ae = solve_kuranishi(m, h, order, sector="A")
    a_obs = max((p.max_norm() for p in sol_ae.obstruction), default=0.0)
    criterion = surj and t_zero
    consistent = (not criterion) or a_obs < tol
    rep.add(CheckLine("criterion implies vanishing obstruction", PASS if consistent else FAIL,
                      a_obs, tol, f"direct obstruction through order {sol_ae.order}"))
    if criterion:
        verdict = "criterion satisfied: unobstructed"
    elif a_obs < tol:
        verdict = ("criterion not satisfied, yet the direct obstruction vanishes "
                   "(the criterion is sufficient, not necessary)")
    else:
        verdict = ("criterion not satisfied and the direct obstruction is nonzero "
                   "(the criterion is sufficient, not necessary)")
    rep.info.update({"verdict": verdict, "delta_1_rank": rank, "h2_q": h2q,
                     "tangent_obstruction": [p.format() for p in sol_t.obstruction],
                     "pair_obstruction": [p.format() for p in sol_ae.obstruction]})
    return rep


def _obstruction_at(sol: KuranishiSolution, t):
    return np.array([p.evaluate(t) for p in sol.obstruction], dtype=complex)


def _obstruction_budget(sols, t):
    tmax = float(np.max(np.abs(t))) if len(t) else 0.0
    total = 0.0
    for sol in sols:
        N = sol.order
        for p in sol.obstruction:
            total += sum(abs(c) for e, c in p if sum(e) == N)
    return total * tmax ** (max(s.order for s in sols) + 1)


def obstruction_diagram_check(m: SpectralModel, h: HodgeData, sol_q: KuranishiSolution,
                              sol_ae: KuranishiSolution, t_point, tol: float = 1e-6,
                              les: LESData | None = None,
                              sol_t: KuranishiSolution | None = None) -> Report:
    """Numerical commutativity of the obstruction diagram at ``t_point``.

    Left square: ``iota*(Ob_Q(t))`` against the pair obstruction of the solve
    seeded with ``iota*`` of the ``Q`` seeds.  Right square:
    ``pi*(Ob_A(t))`` against the tangent obstruction of the solve seeded with
    ``pi*`` of the pair seeds.  Partner solves are run here; a supplied
    ``sol_t`` must use exactly those ``pi*`` seeds.

    Raises
    ------
    IncompatibleBasesError
        Parameter counts differ from ``len(t_point)`` or ``sol_t`` uses other seeds.
    """
    t = np.asarray(t_point, dtype=complex)
    if sol_q.sector != "Q" or sol_ae.sector != "A":
        raise IncompatibleBasesError("expected a Q-sector and an A-sector solution")
    for sol in (sol_q, sol_ae):
        if sol.num_params != len(t) or len(sol.eta) != len(t):
            raise IncompatibleBasesError(
                f"solution with {len(sol.eta)} directions cannot be evaluated at a point "
                f"with {len(t)} coordinates")
    les = les or les_maps(m, h)
    rep = Report("obstruction_diagram")
    if m.n < 2:
        for name in ("left square", "right square"):
            rep.add(CheckLine(name, VACUOUS, None, tol, "H^2 = 0 when n = 1"))
        return rep
    order = max(sol_q.order, sol_ae.order)
    dt = m.dim("T", 1)
    dq = m.dim("Q", 1)
    iota_seeds = [h.H("A", 1) @ np.concatenate([v, np.zeros(dt, complex)]) for v in sol_q.eta]
    partner_a = solve_kuranishi(m, h, sol_q.order, sector="A", seed_vectors=iota_seeds,
                                allow_overflow=True)
    pi_seeds = [h.H("T", 1) @ v[dq:] for v in sol_ae.eta]
    if sol_t is not None:
        if (sol_t.sector != "T" or len(sol_t.eta) != len(pi_seeds)
                or not np.allclose(sol_t.eta, np.array(pi_seeds).reshape(sol_t.eta.shape),
                                   atol=1e-10)):
            raise IncompatibleBasesError("sol_t is not seeded with pi* of the pair directions")
        partner_t = sol_t
    else:
        partner_t = solve_kuranishi(m, h, sol_ae.order, sector="T", seed_vectors=pi_seeds,
                                    allow_overflow=True)
    ob_q = _obstruction_at(sol_q, t)
    left_a = les.iota[2] @ ob_q if ob_q.size else np.zeros(les.dims[("A", 2)], complex)
    left_b = _obstruction_at(partner_a, t)
    ob_a = _obstruction_at(sol_ae, t)
    right_a = les.pi[2] @ ob_a if ob_a.size else np.zeros(les.dims[("T", 2)], complex)
    right_b = _obstruction_at(partner_t, t)
    budget = _obstruction_budget([sol_q, partner_a, sol_ae, partner_t], t)
    thr = tol + budget
    lres = _mnorm(left_a - left_b)
    rres = _mnorm(right_a - right_b)
    rep.add(CheckLine.measure("left square", lres, thr, "iota*(Ob_Q) vs Ob_A(iota* seeds)"))
    rep.add(CheckLine.measure("right square", rres, thr, "pi*(Ob_A) vs Ob_T(pi* seeds)"))
    rep.info.update({
        "t": [complex(v) for v in t], "budget": budget, "order": order,
        "paths": {"iota*(Ob_Q)": float(np.linalg.norm(left_a)),
                  "Ob_A(iota* seeds)": float(np.linalg.norm(left_b)),
                  "pi*(Ob_A)": float(np.linalg.norm(right_a)),
                  "Ob_T(pi* seeds)": float(np.linalg.norm(right_b))},
    })
    return rep
