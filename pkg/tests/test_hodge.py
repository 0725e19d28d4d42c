import dataclasses
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cached_hodge, cached_model
from pairdef.dgla import AEForm, AESeriesForm
from pairdef.errors import ModelError, ShapeError
from pairdef.hodge import (build_hodge, cohomology_dims, cohomology_table, harmonic_basis_labels,
                           hodge_apply, hodge_report, rref_basis)
from pairdef.models import ModelConfig, build_abstract_model
from pairdef.series import TruncatedSeries


def dims_of(h, sector):
    return [h.dim(sector, q) for q in range(h.model.n + 1)]


def test_curve_with_trivial_line_bundle():
    h = cached_hodge("n1r1K2")
    assert dims_of(h, "Q") == [1, 1]
    assert dims_of(h, "T") == [1, 1]
    assert dims_of(h, "A") == [2, 2]


def test_zero_differential_gives_identity_projector():
    h = cached_hodge("n2r2K0")
    for s in ("Q", "T", "A"):
        for q in range(3):
            assert np.allclose(h.H(s, q), np.eye(h.model.dim(s, q)), rtol=0, atol=1e-14)
            assert not np.any(h.G(s, q))


def test_green_operator_on_single_modes():
    m, h = cached_model("n1r1K2"), cached_hodge("n1r1K2")
    modes = list(itertools.product(range(-2, 3), repeat=2))
    for idx, (kx, ky) in enumerate(modes):
        v = np.zeros(m.dim("Q", 1), complex)
        v[idx] = 1
        out = hodge_apply(h, "Q", "G", v, q=1)
        if (kx, ky) == (0, 0):
            assert np.allclose(out, 0)
        else:
            # flat Laplacian on exp(i(kx x + ky y)): |d/dzbar symbol|^2 = (kx^2 + ky^2) / 4
            assert np.allclose(out, v / ((kx * kx + ky * ky) / 4), atol=1e-12)


def test_projector_and_green_on_harmonic_vectors(model, hodge):
    for s in ("Q", "T", "A"):
        for q in range(model.n + 1):
            for eta in hodge.basis(s, q):
                assert np.allclose(hodge_apply(hodge, s, "H", eta, q=q), eta, atol=1e-10)
                assert np.allclose(hodge_apply(hodge, s, "G", eta, q=q), 0, atol=1e-10)


def test_constant_one_form_is_coclosed():
    m, h = cached_model("n1r1K2"), cached_hodge("n1r1K2")
    v = np.zeros(m.dim("Q", 1), complex)
    v[m.lattice.zero_index()] = 1
    assert np.allclose(hodge_apply(h, "Q", "adjoint", v, q=1), 0)


def test_coupling_kills_classes():
    h = cached_hodge("n2r1K1c11")
    assert h.dim("A", 2) < h.dim("Q", 2) + h.dim("T", 2)
    assert dims_of(h, "A") == [1, 3, 2]


def test_identity_endomorphism_gives_a_class(model, hodge):
    assert hodge.dim("Q", 0) >= 1 and hodge.dim("A", 0) >= 1


def test_identities_on_builtins(model, hodge):
    rep = hodge_report(hodge)
    assert rep.passed, rep.to_text()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["Q", "T", "A"]), st.integers(0, 1))
def test_hodge_decomposition(seed, sector, q):
    m, h = cached_model("n1r2K4u"), cached_hodge("n1r2K4u")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(m.dim(sector, q)) + 1j * rng.standard_normal(m.dim(sector, q))
    Gw = h.G(sector, q) @ w
    parts = h.H(sector, q) @ w
    if q > 0:
        parts += m.dbar_matrix(sector, q - 1) @ (h.adjoint(sector, q - 1) @ Gw)
    if q < m.n:
        parts += h.adjoint(sector, q) @ (m.dbar_matrix(sector, q) @ Gw)
    assert np.max(np.abs(w - parts)) < 1e-10 * max(1.0, np.max(np.abs(w)))


@pytest.mark.parametrize("name", ["n1r1K2", "n2r1K1c11", "n1r2K4u"])
def test_kernel_stable_under_tiny_gram_perturbation(name):
    m, h = cached_model(name), cached_hodge(name)
    rng = np.random.default_rng(1)
    gram = {}
    for s, mats in m.gram.items():
        out = []
        for G in mats:
            E = rng.standard_normal(G.shape) + 1j * rng.standard_normal(G.shape)
            E = (E + E.conj().T) / 2
            E *= 0.9e-12 / max(np.max(np.abs(E)), 1e-300) if E.size else 1
            out.append(G + E)
        gram[s] = tuple(out)
    mp = dataclasses.replace(m, gram=gram, _cache={})
    hp = build_hodge(mp)
    assert cohomology_dims(hp) == cohomology_dims(h)


def test_indefinite_gram_rejected():
    m = build_abstract_model(ModelConfig(kind="abstract", n=1, dims={"Q": [1, 1], "T": [1, 1]},
                                         tensors={"gram": {"T": [[[0.0]], [[1.0]]]}}))
    with pytest.raises(ModelError):
        build_hodge(m)


def test_basis_is_ordered_q_before_t():
    h = cached_hodge("n1r1K2")
    assert harmonic_basis_labels(h, "A", 1) == ["Q:id*dzb1@0,0", "T:d1*dzb1@0,0"]
    piv = h.pivots("A", 1)
    assert piv == sorted(piv)


def test_rref_basis_is_canonical():
    rng = np.random.default_rng(0)
    V = rng.standard_normal((3, 6))
    mix = rng.standard_normal((3, 3))
    b1, p1 = rref_basis(V)
    b2, p2 = rref_basis(mix @ V)
    assert p1 == p2 and np.allclose(b1, b2)
    assert np.allclose(b1[:, p1], np.eye(3))


def test_apply_to_forms_and_series():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    eta = h.basis("A", 1)[0]
    f = AEForm.from_vector(m, 1, eta)
    assert np.allclose(hodge_apply(h, "A", "H", f).vector(), eta)
    s = TruncatedSeries.linear([eta, 2 * eta], 2)
    out = hodge_apply(h, "A", "H", AESeriesForm.from_stacked(m, 1, s))
    assert out.stacked().allclose(s, atol=1e-10)
    assert hodge_apply(h, "A", "adjoint", f).degree == 0
    with pytest.raises(ShapeError):
        hodge_apply(h, "Q", "H", f)
    with pytest.raises(ShapeError):
        hodge_apply(h, "A", "adjoint", eta[:3], q=1)
    with pytest.raises(ShapeError):
        hodge_apply(h, "A", "laplacian", eta, q=1)


def test_table_rendering():
    text = cohomology_table(cached_hodge("n1r1K2"))
    assert text.splitlines()[3].split() == ["A", "2", "2"]
    rows = cohomology_dims(cached_hodge("n1r1K2"))
    assert {"sector": "A", "q": 1, "dim": 2} in rows
