"""Finite spectral models of a holomorphic pair on a flat torus.

A model fixes bases for the Dolbeault complexes of ``E``, ``Q = End(E)`` and
``T = T_X`` and stores every operator the deformation engine needs as a
matrix (differentials, curvature contraction, Gram pairings) or a sparse
bilinear map (connection contraction, brackets).

Conventions
-----------
* Forms are written ``f dzbar^J`` with ``J`` increasing; ``dbar(f dzbar^J) =
  sum_i d_{zbar_i} f dzbar^i ^ dzbar^J``.
* A ``T``-valued form ``phi = sum_i phi^i d/dz_i`` acts on forms through
  ``L_phi alpha = sum_i phi^i ^ d_{z_i} alpha`` (the contraction hits the
  leftmost (1,0) slot and the (0,q) factors of ``phi`` stay on the left).
* ``[phi, psi]^j = phi^i ^ d_i psi^j - (-1)^{pq} psi^i ^ d_i phi^j`` and
  ``[A, B] = A ^ B - (-1)^{pq} B ^ A``.
* ``phi -| F = sum_i phi^i ^ F_i`` with ``F_i = sum_k F_{i kbar} dzbar^k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import fourier
from .bilinear import Trilinear, assemble
from .errors import ConfigError, ModelError, ParseError, UnsupportedError
from .fourier import ModeLattice, monomial_label, subsets, wedge
from .reports import FAIL, OVERFLOW, PASS, VACUOUS, CheckLine, Report

SECTORS = ("E", "Q", "T")


# ---------------------------------------------------------------------------
# fiber algebra
# ---------------------------------------------------------------------------
def gl_basis(r):
    """Basis of ``gl(r)``: off-diagonal units, diagonal differences, identity.

    Returns
    -------
    mats : ndarray, shape (r*r, r, r)
    labels : list of str
    """
    mats, labels = [], []
    for a in range(r):
        for b in range(r):
            if a != b:
                m = np.zeros((r, r), dtype=complex)
                m[a, b] = 1
                mats.append(m)
                labels.append(f"e{a + 1}{b + 1}")
    for a in range(r - 1):
        m = np.zeros((r, r), dtype=complex)
        m[a, a], m[a + 1, a + 1] = 1, -1
        mats.append(m)
        labels.append(f"h{a + 1}")
    mats.append(np.eye(r, dtype=complex))
    labels.append("id")
    return np.array(mats), labels


def gl_coordinates(mats, X):
    """Coordinates of the matrix ``X`` in the basis ``mats``."""
    B = mats.reshape(len(mats), -1).T
    return np.linalg.solve(B, np.asarray(X, dtype=complex).ravel())


def gl_structure_constants(mats):
    """``c[f, g, h]`` with ``[M_f, M_g] = sum_h c[f, g, h] M_h``."""
    d = len(mats)
    B = mats.reshape(d, -1).T
    comm = np.einsum("fab,gbc->fgac", mats, mats) - np.einsum("gab,fbc->fgac", mats, mats)
    coords = np.linalg.solve(B, comm.reshape(d * d, -1).T).T
    return coords.reshape(d, d, d)


# ---------------------------------------------------------------------------
# configuration and model
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ModelConfig:
    """Input to the model builders.

    For ``kind="torus"``: ``n``, ``r``, ``K``, an optional real potential
    ``potential`` (mapping mode tuple -> complex Fourier coefficient) defining
    ``h = e^u``, and an optional central twist ``twist = (c_1, ..., c_n)``.
    For ``kind="abstract"``: ``dims`` (sector -> list of n+1 dimensions) and
    ``tensors`` (see :func:`build_abstract_model`).
    """

    kind: str = "torus"
    n: int = 1
    r: int = 1
    K: int | None = 1
    potential: dict | None = None
    twist: tuple | None = None
    dims: dict | None = None
    tensors: dict | None = None


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Finite presentation of the Dolbeault complexes and their operations.

    Dictionaries keyed by ``(p, q)`` hold bilinear maps from degree ``p`` x
    degree ``q`` into degree ``p + q`` and exist for ``p + q <= n``.
    """

    kind: str
    n: int
    r: int
    dims: dict
    dbar: dict
    conn10: dict
    bracket_t: dict
    bracket_q: dict
    curvature: tuple
    gram: dict
    conn10_e: dict = field(default_factory=dict)
    action_e: dict = field(default_factory=dict)
    band: int | None = None
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    # dimensions -----------------------------------------------------------
    def dim(self, sector, q):
        if q < 0 or q > self.n:
            return 0
        if sector == "A":
            return self.dims["Q"][q] + self.dims["T"][q]
        return self.dims[sector][q]

    @property
    def lattice(self):
        if self.band is None:
            return None
        return ModeLattice(self.n, self.band)

    @property
    def potential_band(self):
        return int(self.meta.get("potential_band", 0))

    @property
    def curvature_band(self):
        return self.potential_band

    @property
    def twist(self):
        return tuple(self.meta.get("twist") or ())

    @property
    def has_twist(self):
        return any(c != 0 for c in self.twist)

    def dbar_matrix(self, sector, q):
        """Matrix of ``dbar`` from degree ``q`` to ``q + 1`` (zero-size outside range)."""
        if sector == "A":
            return self.dbar_a(q)
        if 0 <= q < self.n:
            return self.dbar[sector][q]
        return np.zeros((self.dim(sector, q + 1), self.dim(sector, q)), dtype=complex)

    def curvature_matrix(self, p):
        if 0 <= p < self.n:
            return self.curvature[p]
        return np.zeros((self.dim("Q", p + 1), self.dim("T", p)), dtype=complex)

    def b_block(self, p):
        """Off-diagonal block ``phi -> B ^ phi = -(-1)^p phi -| F`` of ``dbar_A``."""
        return -((-1) ** p) * self.curvature_matrix(p)

    def dbar_a(self, q):
        key = ("dbar_a", q)
        if key not in self._cache:
            self._cache[key] = self._dbar_a(q)
        return self._cache[key]

    def _dbar_a(self, q):
        DQ, DT = self.dbar_matrix("Q", q), self.dbar_matrix("T", q)
        B = self.b_block(q)
        top = np.hstack([DQ, B])
        bottom = np.hstack([np.zeros((DT.shape[0], DQ.shape[1]), dtype=complex), DT])
        return np.vstack([top, bottom])

    def gram_matrix(self, sector, q):
        if sector == "A":
            key = ("gram_a", q)
            if key not in self._cache:
                GQ, GT = self.gram["Q"][q], self.gram["T"][q]
                out = np.zeros((len(GQ) + len(GT),) * 2, dtype=complex)
                out[:len(GQ), :len(GQ)] = GQ
                out[len(GQ):, len(GQ):] = GT
                out.setflags(write=False)
                self._cache[key] = out
            return self._cache[key]
        return self.gram[sector][q]

    # bands and labels -----------------------------------------------------
    def fiber_dim(self, sector):
        return {"E": self.r, "Q": self.r * self.r, "T": self.n}[sector]

    def basis_band(self, sector, q):
        """Fourier band (sup-norm of the mode) of every basis vector."""
        if sector == "A":
            return np.concatenate([self.basis_band("Q", q), self.basis_band("T", q)])
        d = self.dim(sector, q)
        if self.band is None:
            return np.zeros(d, dtype=np.int64)
        return np.tile(self.lattice.bands, d // self.lattice.size)

    def basis_labels(self, sector, q):
        if sector == "A":
            return ([f"Q:{s}" for s in self.basis_labels("Q", q)]
                    + [f"T:{s}" for s in self.basis_labels("T", q)])
        d = self.dim(sector, q)
        if self.band is None:
            return [f"{sector}{q}[{i}]" for i in range(d)]
        fib = self.meta["fiber_labels"][sector]
        lat = self.lattice
        out = []
        for J in subsets(self.n, q):
            for f in fib:
                for k in lat.modes:
                    mode = "" if self.band == 0 else "@" + ",".join(str(int(v)) for v in k)
                    out.append(f"{f}*{monomial_label(J)}{mode}")
        return out

    def band_of(self, sector, q, vec, rel=1e-12):
        """Largest band carrying a coefficient above ``rel`` times the max."""
        vec = np.asarray(vec)
        if vec.size == 0 or self.band is None:
            return 0
        mag = np.abs(vec)
        top = mag.max()
        if top == 0:
            return 0
        return int(self.basis_band(sector, q)[mag > rel * top].max())

    def describe(self):
        out = {"kind": self.kind, "n": self.n, "r": self.r, "band": self.band}
        if self.band is not None:
            out["potential_band"] = self.potential_band
            out["twist"] = [complex(c) for c in self.twist]
        return out


# ---------------------------------------------------------------------------
# torus builder
# ---------------------------------------------------------------------------
def _check_potential(n, K, potential):
    pot = {}
    for k, c in (potential or {}).items():
        k = tuple(int(v) for v in k)
        if len(k) != 2 * n:
            raise ConfigError(f"potential mode {k} must have {2 * n} entries")
        c = complex(c)
        if c != 0:
            pot[k] = pot.get(k, 0) + c
    for k, c in pot.items():
        mk = tuple(-v for v in k)
        if abs(pot.get(mk, 0) - np.conj(c)) > 1e-14 * max(1.0, abs(c)):
            raise ConfigError(f"potential is not real: coefficient of {mk} must conjugate {k}")
    band = max((max(abs(v) for v in k) for k in pot), default=0)
    if band > K:
        raise ConfigError(f"potential band {band} exceeds the Fourier cutoff K={K}")
    return dict(sorted(pot.items())), band


def curvature_coefficients(lat, potential, twist):
    """Fourier coefficients ``F[mu][i, k]`` of ``F_{i kbar}``.

    ``F_{i kbar} = -d_i d_kbar u + c_i delta_ik`` for ``h = e^u`` and twist ``c``.
    """
    n = lat.n
    out = {}
    for mu, c in potential.items():
        mu_arr = np.array(mu)
        s = np.array([lat.dz(i, mu_arr) for i in range(n)])
        sb = np.array([lat.dzbar(k, mu_arr) for k in range(n)])
        out[mu] = -np.outer(s, sb) * c
    zero = (0,) * (2 * n)
    if twist is not None and any(t != 0 for t in twist):
        out[zero] = out.get(zero, np.zeros((n, n), dtype=complex)) + np.diag(
            np.asarray(twist, dtype=complex))
    return {mu: F for mu, F in out.items() if np.any(F != 0)}


def _dbar_matrices(lat, fib):
    n, M = lat.n, lat.size
    mats = []
    for q in range(n):
        src, dst = subsets(n, q), subsets(n, q + 1)
        D = np.zeros((len(dst) * fib * M, len(src) * fib * M), dtype=complex)
        dst_index = {J: a for a, J in enumerate(dst)}
        for a, J in enumerate(src):
            for i in range(n):
                w = wedge((i,), J)
                if w is None:
                    continue
                sign, Jo = w
                sym = sign * lat.dzbar(i)
                for f in range(fib):
                    r0 = (dst_index[Jo] * fib + f) * M
                    c0 = (a * fib + f) * M
                    D[r0 + np.arange(M), c0 + np.arange(M)] = sym
        mats.append(D)
    return tuple(mats)


def _curvature_matrices(lat, r, Fhat):
    """Matrices of ``phi -> phi -| F`` from ``T_p`` to ``Q_{p+1}``."""
    n, M = lat.n, lat.size
    fq = r * r
    id_index = fq - 1
    mats = []
    for p in range(n):
        src, dst = subsets(n, p), subsets(n, p + 1)
        dst_index = {J: a for a, J in enumerate(dst)}
        C = np.zeros((len(dst) * fq * M, len(src) * n * M), dtype=complex)
        for mu, F in Fhat.items():
            target = lat.index(lat.modes + np.array(mu))
            ok = target >= 0
            for a, J in enumerate(src):
                for i in range(n):
                    for k in range(n):
                        if F[i, k] == 0:
                            continue
                        w = wedge(J, (k,))
                        if w is None:
                            continue
                        sign, Jo = w
                        rows = (dst_index[Jo] * fq + id_index) * M + target[ok]
                        cols = (a * n + i) * M + np.arange(M)[ok]
                        C[rows, cols] += sign * F[i, k]
        mats.append(C)
    return tuple(mats)


def _weight_fourier(lat, potential):
    """Fourier coefficients of ``e^u`` for mode differences inside ``2K``."""
    n, K = lat.n, lat.K
    if not potential:
        return None
    ng = max(4 * K + 8, 16 if n == 1 else 12)
    axes = [np.arange(ng) * 2 * np.pi / ng] * (2 * n)
    grids = np.meshgrid(*axes, indexing="ij")
    u = np.zeros((ng,) * (2 * n), dtype=complex)
    for mu, c in potential.items():
        phase = sum(m * g for m, g in zip(mu, grids))
        u += c * np.exp(1j * phase)
    chat = np.fft.fftn(np.exp(u.real)) / ng ** (2 * n)
    return chat, ng


def _gram_e(lat, r, potential):
    n, M = lat.n, lat.size
    wf = _weight_fourier(lat, potential)
    if wf is None:
        block = np.eye(M, dtype=complex)
    else:
        chat, ng = wf
        diff = lat.modes[:, None, :] - lat.modes[None, :, :]
        block = chat[tuple(np.moveaxis(diff % ng, -1, 0))]
        block = (block + block.conj().T) / 2
    out = []
    for q in range(n + 1):
        out.append(np.kron(np.eye(comb(n, q) * r), block))
    return tuple(out)


def build_torus_model(cfg: ModelConfig) -> SpectralModel:
    """Build the spectral model of ``(T^n, O^r, h = e^u)`` with optional central twist.

    Raises
    ------
    UnsupportedError
        ``n`` outside ``{1, 2}`` or ``r < 1``.
    ConfigError
        Wrong kind, negative cutoff, non-real potential, malformed twist.
    """
    if cfg.kind != "torus":
        raise ConfigError("build_torus_model needs kind='torus'")
    n, r, K = cfg.n, cfg.r, cfg.K
    if n not in (1, 2) or r < 1:
        raise UnsupportedError(f"torus models need n in (1, 2) and r >= 1, got n={n}, r={r}")
    if K is None or K < 0:
        raise ConfigError("the Fourier cutoff K must be a non-negative integer")
    twist = None
    if cfg.twist is not None:
        twist = tuple(complex(c) for c in cfg.twist)
        if len(twist) != n:
            raise ConfigError(f"twist needs {n} entries, got {len(twist)}")
    potential, pband = _check_potential(n, K, cfg.potential)
    lat = ModeLattice(n, K)
    mats, qlabels = gl_basis(r)
    fq = r * r
    struct = gl_structure_constants(mats)

    dbar = {s: _dbar_matrices(lat, f) for s, f in (("E", r), ("Q", fq), ("T", n))}
    Fhat = curvature_coefficients(lat, potential, twist)
    curvature = _curvature_matrices(lat, r, Fhat)

    conn_terms = [(i, g, g, 1.0, (2, i), "xy") for i in range(n) for g in range(fq)]
    q_terms = [(f, g, h, struct[f, g, h], None, "xy")
               for f in range(fq) for g in range(fq) for h in range(fq) if struct[f, g, h] != 0]
    conn_e_terms = [(i, a, a, 1.0, (2, i), "xy") for i in range(n) for a in range(r)]
    act_terms = [(f, a, b, mats[f][b, a], None, "xy")
                 for f in range(fq) for a in range(r) for b in range(r) if mats[f][b, a] != 0]
    conn10, bracket_t, bracket_q, conn10_e, action_e = {}, {}, {}, {}, {}
    for p in range(n + 1):
        for q in range(n + 1 - p):
            sgn = -((-1) ** (p * q))
            t_terms = [(i, j, j, 1.0, (2, i), "xy") for i in range(n) for j in range(n)]
            t_terms += [(j, i, j, sgn, (1, i), "yx") for i in range(n) for j in range(n)]
            conn10[(p, q)] = assemble(lat, p, q, n, fq, fq, conn_terms)
            bracket_t[(p, q)] = assemble(lat, p, q, n, n, n, t_terms)
            bracket_q[(p, q)] = assemble(lat, p, q, fq, fq, fq, q_terms)
            ce = assemble(lat, p, q, n, r, r, conn_e_terms)
            for mu, c in potential.items():
                mu_arr = np.array(mu)
                du = [(i, a, a, lat.dz(i, mu_arr) * c, None, "xy")
                      for i in range(n) for a in range(r)]
                ce = ce + assemble(lat, p, q, n, r, r, du, shift=mu)
            conn10_e[(p, q)] = ce
            action_e[(p, q)] = assemble(lat, p, q, fq, r, r, act_terms)

    frob = np.einsum("fab,gab->fg", mats.conj(), mats)
    gram = {
        "E": _gram_e(lat, r, potential),
        "Q": tuple(np.kron(np.kron(np.eye(comb(n, q)), frob), np.eye(lat.size))
                   for q in range(n + 1)),
        "T": tuple(np.eye(comb(n, q) * n * lat.size, dtype=complex) for q in range(n + 1)),
    }
    dims = {s: tuple(comb(n, q) * f * lat.size for q in range(n + 1))
            for s, f in (("E", r), ("Q", fq), ("T", n))}
    meta = {
        "potential": potential,
        "potential_band": pband,
        "twist": list(twist) if twist is not None else [0j] * n,
        "fiber_labels": {"E": [f"e{a + 1}" for a in range(r)], "Q": qlabels,
                         "T": [f"d{i + 1}" for i in range(n)]},
    }
    return _freeze(SpectralModel("torus", n, r, dims, dbar, conn10, bracket_t, bracket_q,
                                 curvature, gram, conn10_e, action_e, K, meta))


def _freeze(m):
    for mats in list(m.dbar.values()) + list(m.gram.values()) + [m.curvature]:
        for a in mats:
            a.setflags(write=False)
    return m


# ---------------------------------------------------------------------------
# abstract builder
# ---------------------------------------------------------------------------
def _as_trilinear(obj, shape, where):
    if isinstance(obj, Trilinear):
        tri = obj
    else:
        arr = np.asarray(obj, dtype=complex)
        if arr.ndim != 3:
            raise ConfigError(f"{where}: expected a bilinear map (3-index array)")
        tri = Trilinear.from_dense(arr)
    if tri.shape != tuple(shape):
        raise ConfigError(f"{where}: shape {tri.shape} does not match expected {tuple(shape)}")
    return tri


def _as_matrix(obj, shape, where):
    arr = np.array(obj, dtype=complex)
    if arr.shape != tuple(shape):
        raise ConfigError(f"{where}: shape {arr.shape} does not match expected {tuple(shape)}")
    return arr


def build_abstract_model(cfg: ModelConfig) -> SpectralModel:
    """Install user-supplied tensors verbatim after shape checks.

    ``cfg.dims`` maps ``"Q"``, ``"T"`` (and optionally ``"E"``) to ``n + 1``
    dimensions.  ``cfg.tensors`` may contain ``dbar`` (sector -> list of
    ``n`` matrices), ``curvature`` (list of ``n`` matrices), ``gram``
    (sector -> list of ``n + 1`` matrices) and ``conn10``, ``bracket_T``,
    ``bracket_Q``, ``conn10_E``, ``action_E`` (``(p, q)`` -> bilinear map).
    Missing tensors default to zero maps and identity Gram matrices.
    """
    if cfg.kind != "abstract":
        raise ConfigError("build_abstract_model needs kind='abstract'")
    n = cfg.n
    if n is None or n < 1:
        raise ConfigError("n must be a positive integer")
    dims_in = cfg.dims or {}
    dims = {}
    for s in SECTORS:
        if s not in dims_in:
            if s == "E":
                dims[s] = (0,) * (n + 1)
                continue
            raise ConfigError(f"dims: missing sector {s}")
        d = tuple(int(v) for v in dims_in[s])
        if len(d) != n + 1:
            raise ConfigError(f"dims.{s}: need {n + 1} entries, got {len(d)}")
        if min(d) < 0:
            raise ConfigError(f"dims.{s}: negative dimension")
        dims[s] = d
    if all(v == 0 for s in ("Q", "T") for v in dims[s]):
        raise ConfigError("dims: all sectors are empty")
    tens = dict(cfg.tensors or {})

    def dim(s, q):
        return dims[s][q] if 0 <= q <= n else 0

    dbar = {}
    for s in SECTORS:
        given = (tens.get("dbar") or {}).get(s)
        mats = []
        for q in range(n):
            shape = (dim(s, q + 1), dim(s, q))
            where = f"tensors.dbar.{s}[{q}]"
            mats.append(_as_matrix(given[q], shape, where) if given is not None and q < len(given)
                        else np.zeros(shape, dtype=complex))
        if given is not None and len(given) != n:
            raise ConfigError(f"tensors.dbar.{s}: need {n} matrices, got {len(given)}")
        dbar[s] = tuple(mats)
    curv_in = tens.get("curvature")
    if curv_in is not None and len(curv_in) != n:
        raise ConfigError(f"tensors.curvature: need {n} matrices, got {len(curv_in)}")
    curvature = tuple(
        _as_matrix(curv_in[p], (dim("Q", p + 1), dim("T", p)), f"tensors.curvature[{p}]")
        if curv_in is not None else np.zeros((dim("Q", p + 1), dim("T", p)), dtype=complex)
        for p in range(n))
    gram = {}
    for s in SECTORS:
        given = (tens.get("gram") or {}).get(s)
        if given is not None and len(given) != n + 1:
            raise ConfigError(f"tensors.gram.{s}: need {n + 1} matrices")
        gram[s] = tuple(
            _as_matrix(given[q], (dim(s, q), dim(s, q)), f"tensors.gram.{s}[{q}]")
            if given is not None else np.eye(dim(s, q), dtype=complex)
            for q in range(n + 1))
    bil = {}
    specs = {"conn10": ("T", "Q", "Q"), "bracket_T": ("T", "T", "T"),
             "bracket_Q": ("Q", "Q", "Q"), "conn10_E": ("T", "E", "E"),
             "action_E": ("Q", "E", "E")}
    for name, (s1, s2, so) in specs.items():
        given = tens.get(name) or {}
        out = {}
        for key in given:
            p, q = _pq(key)
            if p + q > n or p < 0 or q < 0:
                raise ConfigError(f"tensors.{name}: degree pair {key} exceeds n={n}")
        optional = name in ("conn10_E", "action_E") and not given
        for p in range(n + 1):
            for q in range(n + 1 - p):
                shape = (dim(so, p + q), dim(s1, p), dim(s2, q))
                val = _lookup(given, p, q)
                if val is None:
                    if optional:
                        continue
                    out[(p, q)] = Trilinear(shape)
                else:
                    out[(p, q)] = _as_trilinear(val, shape, f"tensors.{name}[{p},{q}]")
        bil[name] = out
    meta = dict((tens.get("meta") or {}))
    return _freeze(SpectralModel("abstract", n, int(cfg.r or 1), dims, dbar, bil["conn10"],
                                 bil["bracket_T"], bil["bracket_Q"], curvature, gram,
                                 bil["conn10_E"], bil["action_E"], None, meta))


def _pq(key):
    if isinstance(key, str):
        a, b = key.split(",")
        return int(a), int(b)
    return int(key[0]), int(key[1])


def _lookup(given, p, q):
    for key, val in given.items():
        if _pq(key) == (p, q):
            return val
    return None


def to_abstract(m: SpectralModel) -> SpectralModel:
    """Re-enter a model's tensors through :func:`build_abstract_model`."""
    tensors = {
        "dbar": {s: list(m.dbar[s]) for s in SECTORS},
        "curvature": list(m.curvature),
        "gram": {s: list(m.gram[s]) for s in SECTORS},
        "conn10": m.conn10, "bracket_T": m.bracket_t, "bracket_Q": m.bracket_q,
        "conn10_E": m.conn10_e, "action_E": m.action_e,
        "meta": {"twist": list(m.twist)},
    }
    return build_abstract_model(ModelConfig(kind="abstract", n=m.n, r=m.r, K=None,
                                            dims={s: list(m.dims[s]) for s in SECTORS},
                                            tensors=tensors))


def build_model(cfg: ModelConfig) -> SpectralModel:
    if cfg.kind == "torus":
        return build_torus_model(cfg)
    if cfg.kind == "abstract":
        return build_abstract_model(cfg)
    raise ConfigError(f"unknown model kind {cfg.kind!r}")


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------
def _low_band_potential_n1():
    # u = 0.3 cos x + 0.2 sin y + 0.1 cos(x + y)
    return {(1, 0): 0.15, (-1, 0): 0.15, (0, 1): -0.1j, (0, -1): 0.1j,
            (1, 1): 0.05, (-1, -1): 0.05}


BUILTINS = {
    "n1r1K2": ModelConfig(n=1, r=1, K=2),
    "n2r2K0": ModelConfig(n=2, r=2, K=0),
    "n2r1K1c11": ModelConfig(n=2, r=1, K=1, twist=(1, 1)),
    "n2r2K0c11": ModelConfig(n=2, r=2, K=0, twist=(1, 1)),
    "n1r2K4u": ModelConfig(n=1, r=2, K=4, potential=_low_band_potential_n1()),
}


def builtin(name) -> SpectralModel:
    if name not in BUILTINS:
        raise ConfigError(f"unknown built-in model {name!r}; choose from {sorted(BUILTINS)}")
    return build_torus_model(BUILTINS[name])


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------
def _enc_matrix(a):
    a = np.asarray(a)
    return {"shape": list(a.shape), "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}


def _dec_matrix(obj, where):
    try:
        shape = tuple(int(s) for s in obj["shape"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed field {exc}", where) from None
    except ValueError as exc:
        raise ParseError(f"bad numeric data ({exc})", where) from None
    size = int(np.prod(shape)) if shape else 1
    if re.size != size or im.size != size:
        raise ParseError(f"expected {size} entries for shape {shape}", where)
    return _complex(re, im).reshape(shape)


def _complex(re, im):
    # assembled componentwise so that signed zeros survive a round trip
    out = np.empty(re.shape, dtype=complex)
    out.real, out.imag = re, im
    return out


def _enc_tri(t):
    return {"shape": list(t.shape), "rows": t.rows.tolist(), "i": t.i.tolist(),
            "j": t.j.tolist(), "re": t.vals.real.tolist(), "im": t.vals.imag.tolist()}


def _dec_tri(obj, where):
    try:
        vals = _complex(np.asarray(obj["re"], dtype=float), np.asarray(obj["im"], dtype=float))
        return Trilinear(obj["shape"], obj["rows"], obj["i"], obj["j"], vals, coalesce=False)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed field {exc}", where) from None
    except ValueError as exc:
        raise ParseError(str(exc), where) from None


_BIL = (("conn10", "conn10"), ("bracket_T", "bracket_t"), ("bracket_Q", "bracket_q"),
        ("conn10_E", "conn10_e"), ("action_E", "action_e"))


def model_to_json(m: SpectralModel) -> dict:
    tensors = {
        "dbar": {s: [_enc_matrix(a) for a in m.dbar[s]] for s in SECTORS},
        "curvature": [_enc_matrix(a) for a in m.curvature],
    }
    for key, attr in _BIL:
        tensors[key] = {f"{p},{q}": _enc_tri(t) for (p, q), t in sorted(getattr(m, attr).items())}
    meta = {}
    if m.kind == "torus":
        meta = {
            "potential": [{"k": list(k), "re": complex(c).real, "im": complex(c).imag}
                          for k, c in m.meta["potential"].items()],
            "twist": [{"re": complex(c).real, "im": complex(c).imag} for c in m.twist],
        }
    return {"kind": m.kind, "n": m.n, "r": m.r,
            "sectors": {s: list(m.dims[s]) for s in SECTORS},
            "tensors": tensors,
            "gram": {s: [_enc_matrix(a) for a in m.gram[s]] for s in SECTORS},
            "band": m.band, "meta": meta}


def save_model(m: SpectralModel) -> bytes:
    """Serialize to deterministic JSON bytes (extension ``.dgla.json``)."""
    return json.dumps(model_to_json(m), sort_keys=True).encode()


def _req(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing field '{key}'", where)
    return obj[key]


def load_model(payload) -> SpectralModel:
    """Inverse of :func:`save_model`; raises :class:`ParseError` naming the bad field."""
    if isinstance(payload, (bytes, bytearray)):
        payload = payload.decode()
    try:
        obj = json.loads(payload) if isinstance(payload, str) else payload
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg} at char {exc.pos})", "payload") from None
    kind = _req(obj, "kind", "model")
    n = _req(obj, "n", "model")
    r = obj.get("r", 1) if isinstance(obj, dict) else 1
    sectors = _req(obj, "sectors", "model")
    tensors = _req(obj, "tensors", "model")
    gram_in = obj.get("gram")
    band = obj.get("band")
    if kind not in ("torus", "abstract"):
        raise ParseError(f"unknown kind {kind!r}", "model.kind")
    if not isinstance(n, int) or n < 1:
        raise ParseError("n must be a positive integer", "model.n")
    dims = {}
    for s in ("Q", "T"):
        dims[s] = _req(sectors, s, "model.sectors")
    dims["E"] = sectors.get("E", [0] * (n + 1))
    dec = {"dbar": {}, "gram": {}}
    dbar_in = _req(tensors, "dbar", "model.tensors")
    for s in SECTORS:
        if s in dbar_in:
            dec["dbar"][s] = [_dec_matrix(a, f"model.tensors.dbar.{s}[{q}]")
                              for q, a in enumerate(dbar_in[s])]
        if gram_in is not None and s in gram_in:
            dec["gram"][s] = [_dec_matrix(a, f"model.gram.{s}[{q}]")
                              for q, a in enumerate(gram_in[s])]
    if "curvature" in tensors:
        dec["curvature"] = [_dec_matrix(a, f"model.tensors.curvature[{p}]")
                            for p, a in enumerate(tensors["curvature"])]
    for key, _ in _BIL:
        if key in tensors:
            dec[key] = {k: _dec_tri(v, f"model.tensors.{key}[{k}]")
                        for k, v in tensors[key].items()}
    meta_in = obj.get("meta") or {}
    try:
        m = build_abstract_model(ModelConfig(kind="abstract", n=n, r=r, K=None, dims=dims,
                                             tensors=dec))
    except ConfigError as exc:
        raise ParseError(str(exc), "model") from None
    if kind == "abstract":
        return m
    try:
        pot = {tuple(e["k"]): complex(e["re"], e["im"]) for e in meta_in.get("potential", [])}
        twist = [complex(e["re"], e["im"]) for e in meta_in.get("twist", [])]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing field {exc}", "model.meta") from None
    if band is None:
        raise ParseError("torus model needs an integer band", "model.band")
    _, pband = _check_potential(n, band, pot)
    mats, qlabels = gl_basis(r)
    meta = {"potential": pot, "potential_band": pband, "twist": twist or [0j] * n,
            "fiber_labels": {"E": [f"e{a + 1}" for a in range(r)], "Q": qlabels,
                             "T": [f"d{i + 1}" for i in range(n)]}}
    return SpectralModel("torus", m.n, m.r, m.dims, m.dbar, m.conn10, m.bracket_t, m.bracket_q,
                         m.curvature, m.gram, m.conn10_e, m.action_e, int(band), meta)


def models_equal(a: SpectralModel, b: SpectralModel) -> bool:
    """Bit-exact equality of every tensor."""
    if (a.n, a.r, a.dims, a.band) != (b.n, b.r, b.dims, b.band):
        return False
    for s in SECTORS:
        if not all(np.array_equal(x, y) for x, y in zip(a.dbar[s], b.dbar[s])):
            return False
        if not all(np.array_equal(x, y) for x, y in zip(a.gram[s], b.gram[s])):
            return False
    if not all(np.array_equal(x, y) for x, y in zip(a.curvature, b.curvature)):
        return False
    for _, attr in _BIL:
        da, db = getattr(a, attr), getattr(b, attr)
        if da.keys() != db.keys() or any(da[k] != db[k] for k in da):
            return False
    return True


# ---------------------------------------------------------------------------
# sampling and validation
# ---------------------------------------------------------------------------
def split_budget(rng, budget, parts):
    """Random split of a band budget into ``parts`` non-negative integers summing to it.

    Always draws ``parts`` uniforms so the generator state does not depend on
    the budget.
    """
    u = rng.random(parts)
    if budget <= 0:
        return [0] * parts
    w = u / u.sum() if u.sum() > 0 else np.full(parts, 1.0 / parts)
    share = w * budget
    out = np.floor(share).astype(int)
    # hand the leftover units to the largest fractional parts
    for idx in np.argsort(-(share - out), kind="stable")[:budget - int(out.sum())]:
        out[idx] += 1
    return [int(v) for v in out]


def random_form(m: SpectralModel, sector, q, band, rng, scale=1.0):
    """Complex Gaussian coefficients on basis vectors of band ``<= band``."""
    d = m.dim(sector, q)
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    z = z * scale
    if m.band is not None:
        z[m.basis_band(sector, q) > band] = 0
    return z


class _Sampler:
    """Band-aware sampler: either splits the exact budget or uses a fixed band."""

    def __init__(self, m, rng, sample_band=None):
        self.m, self.rng, self.sample_band = m, rng, sample_band

    def bands(self, parts, extra=0):
        """Bands for ``parts`` factors of a product that also carries ``extra``.

        Returns ``(bands, overflow)`` with ``overflow`` true when the total
        exceeds the cutoff.
        """
        m = self.m
        K = m.band if m.band is not None else 0
        split = split_budget(self.rng, K - extra, parts)
        if m.band is None:
            return [0] * parts, False
        if self.sample_band is not None:
            bands = [self.sample_band] * parts
        else:
            bands = split
        return bands, sum(bands) + extra > K

    def form(self, sector, q, band):
        return random_form(self.m, sector, q, band, self.rng)


def _norm(v):
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


class _Tracker:
    """Max residual per named check, with overflow and vacuity bookkeeping."""

    def __init__(self, names):
        self.res = {k: 0.0 for k in names}
        self.seen = {k: False for k in names}
        self.overflow = {k: False for k in names}

    def record(self, name, value, overflow=False):
        if overflow:
            self.overflow[name] = True
            return
        self.seen[name] = True
        self.res[name] = max(self.res[name], float(value))

    def lines(self, tol, details=None):
        details = details or {}
        out = []
        for name in self.res:
            d = details.get(name, "")
            if not self.seen[name] and self.overflow[name]:
                out.append(CheckLine(name, OVERFLOW, None, tol,
                                     "every sample exceeds the band budget"))
            elif not self.seen[name]:
                out.append(CheckLine(name, VACUOUS, None, tol, d or "no admissible degrees"))
            else:
                line = CheckLine.measure(name, self.res[name], tol, d)
                if self.overflow[name] and line.status == PASS:
                    line = CheckLine(name, PASS, line.residual, tol,
                                     "some samples skipped (band overflow)")
                out.append(line)
        return out


def validate_model(m: SpectralModel, samples: int = 20, tol: float = 1e-12, seed: int = 0,
                   sample_band: int | None = None) -> Report:
    """Check the structural identities of a model on seeded random forms.

    Lines: ``dbar^2``, ``bianchi``, ``compatibility``, ``flatness``,
    ``operator_square`` (the square of ``dbar_E + phi -| nabla + A``) and
    ``gram``.  Samples whose total band exceeds the cutoff are reported as
    band overflow instead of being asserted.  ``sample_band`` forces every
    factor to that band (used to probe the overflow bookkeeping).
    """
    if samples < 1 or tol <= 0:
        raise ConfigError("samples must be >= 1 and tol > 0")
    rng = np.random.default_rng(seed)
    S = _Sampler(m, rng, sample_band)
    n = m.n
    fb = m.curvature_band
    names = ["dbar^2", "bianchi", "compatibility", "flatness", "operator_square"]
    tr = _Tracker(names)
    for _ in range(samples):
        # dbar^2 = 0
        for s in SECTORS + ("A",):
            for q in range(n + 1):
                (b,), ov = S.bands(1)
                x = S.form(s, q, b)
                if q + 2 > n:
                    continue
                y = m.dbar_matrix(s, q + 1) @ (m.dbar_matrix(s, q) @ x)
                tr.record("dbar^2", _norm(y), ov)
        # Bianchi: dbar_Q C_p = C_{p+1} dbar_T
        for p in range(n):
            (b,), ov = S.bands(1, fb)
            x = S.form("T", p, b)
            if p + 2 > n:
                continue
            lhs = m.dbar_matrix("Q", p + 1) @ (m.curvature_matrix(p) @ x)
            rhs = m.curvature_matrix(p + 1) @ (m.dbar_matrix("T", p) @ x)
            tr.record("bianchi", _norm(lhs - rhs), ov)
        # compatibility of dbar with the (1,0) connection
        for p in range(n + 1):
            for q in range(n + 1 - p):
                (b1, b2), ov = S.bands(2, fb)
                phi, A = S.form("T", p, b1), S.form("Q", q, b2)
                if p + q + 1 > n:
                    continue
                res = (m.dbar_matrix("Q", p + q) @ m.conn10[(p, q)](phi, A)
                       - m.conn10[(p + 1, q)](m.dbar_matrix("T", p) @ phi, A)
                       - (-1) ** p * m.conn10[(p, q + 1)](phi, m.dbar_matrix("Q", q) @ A)
                       + (-1) ** p * m.bracket_q[(p + 1, q)](m.curvature_matrix(p) @ phi, A))
                tr.record("compatibility", _norm(res), ov)
        # flatness of the (1,0) part: L_phi L_psi - (-1)^{pq} L_psi L_phi = L_[phi,psi]
        for p in range(n + 1):
            for q in range(n + 1 - p):
                for s in range(n + 1 - p - q):
                    (b1, b2, b3), ov = S.bands(3)
                    phi, psi, A = S.form("T", p, b1), S.form("T", q, b2), S.form("Q", s, b3)
                    res = (m.conn10[(p, q + s)](phi, m.conn10[(q, s)](psi, A))
                           - (-1) ** (p * q) * m.conn10[(q, p + s)](psi, m.conn10[(p, s)](phi, A))
                           - m.conn10[(p + q, s)](m.bracket_t[(p, q)](phi, psi), A))
                    tr.record("flatness", _norm(res), ov)
        _operator_square(m, S, tr)
    details = {}
    if not m.conn10_e:
        details["operator_square"] = "model carries no E-sector tensors"
    elif m.has_twist:
        details["operator_square"] = "a central twist has no periodic connection on E"
    elif n < 2:
        details["operator_square"] = "needs two degrees of room (n >= 2)"
    rep = Report("validate_model", tr.lines(tol, details))
    rep.add(_gram_line(m, tol))
    rep.info["samples"] = samples
    rep.info["seed"] = seed
    return rep


def _operator_square(m, S, tr):
    """``Dbar^2 s`` versus the Maurer-Cartan residual acting on ``s``."""
    n = m.n
    if not m.conn10_e or m.has_twist:
        return
    # D = dbar_E + phi -| nabla + A, with A, phi of degree 1 and s of degree 0
    bu = m.potential_band
    (ba, bp, bs), ov = S.bands(3, 2 * bu)
    ov = ov or (2 * ba + 2 * bp + bs + 2 * bu > (m.band or 0))
    A, phi = S.form("Q", 1, ba), S.form("T", 1, bp)
    s = S.form("E", 0, bs)
    if n < 2:
        return

    def D(q, v):
        return (m.dbar_matrix("E", q) @ v + m.conn10_e[(1, q)](phi, v)
                + m.action_e[(1, q)](A, v))

    lhs = D(1, D(0, s))
    qpart = (m.dbar_matrix("Q", 1) @ A + m.curvature_matrix(1) @ phi
             + m.conn10[(1, 1)](phi, A) + 0.5 * m.bracket_q[(1, 1)](A, A))
    tpart = m.dbar_matrix("T", 1) @ phi + 0.5 * m.bracket_t[(1, 1)](phi, phi)
    rhs = m.action_e[(2, 0)](qpart, s) + m.conn10_e[(2, 0)](tpart, s)
    tr.record("operator_square", _norm(lhs - rhs), ov)


def _gram_line(m, tol):
    worst_herm, min_eig = 0.0, np.inf
    for s in SECTORS:
        for G in m.gram[s]:
            if G.size == 0:
                continue
            worst_herm = max(worst_herm, _norm(G - G.conj().T))
            min_eig = min(min_eig, float(np.linalg.eigvalsh((G + G.conj().T) / 2).min()))
    ok = worst_herm < tol and min_eig > 0
    return CheckLine("gram", PASS if ok else FAIL, worst_herm, tol,
                     f"min eigenvalue {min_eig:.6g}")


def require_positive_gram(m: SpectralModel):
    """Raise :class:`ModelError` unless every Gram matrix is hermitian positive definite."""
    line = _gram_line(m, 1e-12)
    if line.status != PASS:
        raise ModelError(f"Gram matrices are not hermitian positive definite ({line.detail})")
