"""Finite-dimensional Hodge theory for the Dolbeault complexes of a model.

For each sector (``Q``, ``T`` or the coupled ``A``) and degree ``q`` the
adjoint is taken with respect to the model's Gram pairing,
``dbar* = G_q^{-1} dbar^H G_{q+1}``, and ``Delta = dbar dbar* + dbar* dbar``
is diagonalized by the generalized hermitian eigenproblem
``(G_q Delta) v = lambda G_q v``.  Eigenvalues at or below ``cutoff`` times
the largest one span the harmonic space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ShapeError
from .models import SpectralModel, require_positive_gram
from .reports import CheckLine, Report
from .series import TruncatedSeries

HODGE_SECTORS = ("Q", "T", "A")
KERNEL_CUTOFF = 1e-8
SNAP = 1e-12


def rref_basis(vectors, tol=1e-10):
    """Reduced row echelon basis of the span of the rows of ``vectors``.

    Pivot columns are scanned left to right, so for stacked ``A`` vectors the
    ``Q`` coordinates are used before the ``T`` coordinates.  Returns
    ``(basis, pivots)`` with ``basis[j, pivots[j]] = 1`` and
    ``basis[j, pivots[i]] = 0`` for ``i != j``.
    """
    R = np.array(vectors, dtype=complex, copy=True)
    k, d = R.shape if R.ndim == 2 else (0, 0)
    if k == 0:
        return np.zeros((0, d), dtype=complex), []
    scale = np.abs(R).max()
    pivots, row = [], 0
    for col in range(d):
        if row == k:
            break
        best = row + int(np.argmax(np.abs(R[row:, col])))
        if abs(R[best, col]) <= tol * scale:
            continue
        R[[row, best]] = R[[best, row]]
        R[row] /= R[row, col]
        for other in range(k):
            if other != row and R[other, col] != 0:
                R[other] -= R[other, col] * R[row]
        pivots.append(col)
        row += 1
    R = R[:row]
    R[np.abs(R.real) < SNAP] = R[np.abs(R.real) < SNAP].imag * 1j
    R[np.abs(R.imag) < SNAP] = R[np.abs(R.imag) < SNAP].real
    for j, p in enumerate(pivots):
        R[:, p] = 0
        R[j, p] = 1
    return R, pivots


@dataclass
class DegreeHodge:
    """Hodge operators of one sector at one degree."""

    adjoint: np.ndarray       # degree q+1 -> q
    laplacian: np.ndarray
    harmonic: np.ndarray      # projector H
    green: np.ndarray         # G
    eigenvalues: np.ndarray
    basis: np.ndarray         # rows: deterministic harmonic basis
    pivots: list

    @property
    def kernel_dim(self):
        return len(self.pivots)


@dataclass
class HodgeData:
    """Per-sector, per-degree adjoints, Laplacians, projectors and Green operators."""

    model: SpectralModel
    data: dict = field(default_factory=dict)
    kernel_cutoff: float = KERNEL_CUTOFF

    def get(self, sector, q) -> DegreeHodge:
        if (sector, q) not in self.data:
            raise ShapeError(f"no Hodge data for sector {sector!r} at degree {q}")
        return self.data[(sector, q)]

    def dbar(self, sector, q):
        return self.model.dbar_matrix(sector, q)

    def adjoint(self, sector, q):
        """``dbar*`` from degree ``q + 1`` to ``q``."""
        return self.get(sector, q).adjoint

    def H(self, sector, q):
        return self.get(sector, q).harmonic

    def G(self, sector, q):
        return self.get(sector, q).green

    def basis(self, sector, q):
        return self.get(sector, q).basis

    def pivots(self, sector, q):
        return self.get(sector, q).pivots

    def dim(self, sector, q):
        if q < 0 or q > self.model.n:
            return 0
        return self.get(sector, q).kernel_dim

    def coordinates(self, sector, q, v, digits=None):
        """Coordinates of ``H v`` in the harmonic basis (entries at the pivots)."""
        hv = self.H(sector, q) @ np.asarray(v, dtype=complex)
        c = hv[self.pivots(sector, q)]
        if digits is not None:
            c = np.round(c, digits) + 0.0
        return c


def build_hodge(m: SpectralModel, cutoff: float = KERNEL_CUTOFF, sectors=HODGE_SECTORS) -> HodgeData:
    """Assemble Hodge data for every requested sector and degree.

    Raises
    ------
    ModelError
        A Gram matrix is not hermitian positive definite.
    """
    require_positive_gram(m)
    h = HodgeData(m, kernel_cutoff=cutoff)
    n = m.n
    for s in sectors:
        grams = [m.gram_matrix(s, q) for q in range(n + 1)]
        adj = []
        for q in range(n + 1):
            D = m.dbar_matrix(s, q)
            if q < n:
                Gq, Gq1 = grams[q], grams[q + 1]
                adj.append(np.linalg.solve(Gq, D.conj().T @ Gq1))
            else:
                adj.append(np.zeros((m.dim(s, q), 0), dtype=complex))
        for q in range(n + 1):
            d = m.dim(s, q)
            lap = np.zeros((d, d), dtype=complex)
            if q > 0:
                lap += m.dbar_matrix(s, q - 1) @ adj[q - 1]
            if q < n:
                lap += adj[q] @ m.dbar_matrix(s, q)
            Gq = grams[q]
            A = Gq @ lap
            A = (A + A.conj().T) / 2
            Gs = (Gq + Gq.conj().T) / 2
            if d:
                lam, V = scipy.linalg.eigh(A, Gs)
            else:
                lam, V = np.zeros(0), np.zeros((0, 0), dtype=complex)
            top = float(np.max(np.abs(lam))) if d else 0.0
            ker = lam <= cutoff * top if top > 0 else np.ones(d, dtype=bool)
            V0, Vp, lp = V[:, ker], V[:, ~ker], lam[~ker]
            H = V0 @ V0.conj().T @ Gq
            green = (Vp / lp) @ Vp.conj().T @ Gq
            basis, piv = rref_basis(V0.T)
            h.data[(s, q)] = DegreeHodge(adj[q], lap, H, green, lam, basis, piv)
    return h


# ---------------------------------------------------------------------------
# application to forms and series
# ---------------------------------------------------------------------------
def _operator(h, sector, kind, q):
    if kind == "H":
        return h.H(sector, q), q
    if kind == "G":
        return h.G(sector, q), q
    if kind == "adjoint":
        if q < 1:
            raise ShapeError("the adjoint needs a form of degree >= 1")
        return h.adjoint(sector, q - 1), q - 1
    raise ShapeError(f"unknown Hodge operator {kind!r}")


def hodge_apply(h: HodgeData, sector, kind, w, q=None):
    """Apply ``H``, ``G`` or ``dbar*`` to a vector, form or series.

    ``w`` may be a coefficient vector (degree ``q`` required), a
    :class:`TruncatedSeries` of vectors (degree ``q`` required), an
    :class:`AEForm` or an :class:`AESeriesForm` (``sector`` must be ``"A"``).
    The adjoint lowers the degree by one.
    """
    from .dgla import AEForm, AESeriesForm
    m = h.model
    if isinstance(w, (AEForm, AESeriesForm)):
        if sector != "A":
            raise ShapeError("forms with (A, phi) parts live in sector 'A'")
        w.check(m)
        op, qo = _operator(h, sector, kind, w.degree)
        if isinstance(w, AEForm):
            return AEForm.from_vector(m, qo, op @ w.vector())
        out = w.stacked().map(lambda v: op @ v, shape=(op.shape[0],))
        return AESeriesForm.from_stacked(m, qo, out)
    if q is None:
        raise ShapeError("a degree is required for bare vectors and series")
    op, _ = _operator(h, sector, kind, q)
    if isinstance(w, TruncatedSeries):
        if w.shape != (op.shape[1],):
            raise ShapeError(f"series coefficients of shape {w.shape} for an operator "
                             f"on dimension {op.shape[1]}")
        return w.map(lambda v: op @ v, shape=(op.shape[0],))
    w = np.asarray(w, dtype=complex)
    if w.shape != (op.shape[1],):
        raise ShapeError(f"vector of shape {w.shape} for an operator on dimension {op.shape[1]}")
    return op @ w


def cohomology_dims(h: HodgeData):
    """Rows ``{"sector", "q", "dim"}`` for every sector and degree."""
    rows = []
    for s in HODGE_SECTORS:
        for q in range(h.model.n + 1):
            if (s, q) in h.data:
                rows.append({"sector": s, "q": q, "dim": h.dim(s, q)})
    return rows


def cohomology_table(h: HodgeData) -> str:
    """Aligned text table of cohomology dimensions."""
    n = h.model.n
    head = "sector " + " ".join(f"H^{q:<3}" for q in range(n + 1))
    lines = [head]
    for s in HODGE_SECTORS:
        if (s, 0) in h.data:
            lines.append(f"{s:<6} " + " ".join(f"{h.dim(s, q):<4} " for q in range(n + 1)).rstrip())
    return "\n".join(lines)


def harmonic_basis_labels(h: HodgeData, sector, q):
    """Label of the pivot basis vector behind each harmonic coordinate."""
    labels = h.model.basis_labels(sector, q)
    return [labels[p] for p in h.pivots(sector, q)]


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------
def _mnorm(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def hodge_report(h: HodgeData, tol: float = 1e-10, samples: int = 5, seed: int = 0) -> Report:
    """Residuals of the Hodge identities on every sector and degree."""
    m = h.model
    n = m.n
    res = {k: 0.0 for k in ("H^2=H", "H self-adjoint", "I=H+Delta G", "I=H+G Delta",
                            "G dbar=dbar G", "G dbar*=dbar* G", "HG=GH=0", "decomposition")}
    rng = np.random.default_rng(seed)
    for (s, q), dh in sorted(h.data.items()):
        H, G, L = dh.harmonic, dh.green, dh.laplacian
        Gm = m.gram_matrix(s, q)
        I = np.eye(len(H))
        res["H^2=H"] = max(res["H^2=H"], _mnorm(H @ H - H))
        res["H self-adjoint"] = max(res["H self-adjoint"], _mnorm(Gm @ H - (Gm @ H).conj().T))
        res["I=H+Delta G"] = max(res["I=H+Delta G"], _mnorm(I - H - L @ G))
        res["I=H+G Delta"] = max(res["I=H+G Delta"], _mnorm(I - H - G @ L))
        res["HG=GH=0"] = max(res["HG=GH=0"], _mnorm(H @ G), _mnorm(G @ H))
        if q < n:
            D = m.dbar_matrix(s, q)
            G1 = h.G(s, q + 1)
            res["G dbar=dbar G"] = max(res["G dbar=dbar G"], _mnorm(G1 @ D - D @ G))
            adj = h.adjoint(s, q)
            res["G dbar*=dbar* G"] = max(res["G dbar*=dbar* G"], _mnorm(G @ adj - adj @ G1))
        for _ in range(samples):
            w = rng.standard_normal(len(H)) + 1j * rng.standard_normal(len(H))
            Gw = G @ w
            parts = H @ w
            if q > 0:
                parts = parts + m.dbar_matrix(s, q - 1) @ (h.adjoint(s, q - 1) @ Gw)
            if q < n:
                parts = parts + h.adjoint(s, q) @ (m.dbar_matrix(s, q) @ Gw)
            res["decomposition"] = max(res["decomposition"], _mnorm(w - parts))
    rep = Report("hodge")
    for name, val in res.items():
        rep.add(CheckLine.measure(name, val, tol))
    rep.info["cohomology"] = cohomology_dims(h)
    return rep
