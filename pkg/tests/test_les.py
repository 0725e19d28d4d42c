import dataclasses

import numpy as np
import pytest

from conftest import cached_hodge, cached_model
from pairdef.errors import IncompatibleBasesError
from pairdef.fourier import permutation_sign
from pairdef.hodge import harmonic_basis_labels
from pairdef.kuranishi import solve_kuranishi
from pairdef.les import (exactness_check, les_maps, obstruction_diagram_check, trace_free_check,
                         unobstructed_criterion, well_definedness_check)
from pairdef.reports import FAIL, PASS


def les_of(name):
    return les_maps(cached_model(name), cached_hodge(name))


def find(h, sector, q, label):
    labels = [lab.split("@")[0] for lab in harmonic_basis_labels(h, sector, q)]
    return labels.index(label)


@pytest.mark.parametrize("name", ["n1r1K2", "n2r2K0"])
def test_split_extension(name):
    h, les = cached_hodge(name), les_of(name)
    for q, d in les.delta.items():
        assert not np.any(np.abs(d) > 1e-12)
    for q in range(les.n + 1):
        dq, da, dt = h.dim("Q", q), h.dim("A", q), h.dim("T", q)
        assert da == dq + dt
        assert np.linalg.matrix_rank(les.iota[q]) == dq
        assert np.linalg.matrix_rank(les.pi[q]) == dt


def test_connecting_map_on_twisted_line_bundle():
    h, les = cached_hodge("n2r1K1c11"), les_of("n2r1K1c11")
    col = find(h, "T", 1, "d1*dzb2")
    row = find(h, "Q", 2, "id*dzb1^dzb2")
    # d_1 -| (c_1 dz^1 ^ dzbar^1) = c_1 dzbar^1, written after dzbar^2
    assert les.delta[1][row, col] == pytest.approx(permutation_sign([1, 0]) * 1.0)
    assert np.linalg.matrix_rank(les.delta[1]) == h.dim("Q", 2)


def test_connecting_map_kills_exact_forms():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.standard_normal(m.dim("T", 0)) + 1j * rng.standard_normal(m.dim("T", 0))
        w = m.curvature_matrix(1) @ (m.dbar_matrix("T", 0) @ v)
        assert np.allclose(h.coordinates("Q", 2, w), 0, atol=1e-10)


def test_exactness_on_builtins(builtin_name):
    les = les_of(builtin_name)
    rep = exactness_check(les)
    assert rep.passed, rep.to_text()
    assert rep.line("alternating sum").residual == 0
    for q in range(les.n + 1):
        assert rep.line(f"pi*_{q} iota*_{q}").residual < 1e-12


def test_rank_nullity_against_cohomology_dims():
    h, les = cached_hodge("n2r1K1c11"), les_of("n2r1K1c11")
    r = {q: np.linalg.matrix_rank(d, tol=1e-8) for q, d in les.delta.items()}
    # H^q(A) = coker(delta_{q-1}) + ker(delta_q)
    for q in range(3):
        coker = h.dim("Q", q) - (r[q - 1] if q >= 1 else 0)
        ker = h.dim("T", q) - (r[q] if q < 2 else 0)
        assert h.dim("A", q) == coker + ker


def test_corrupted_delta_fails_at_adjacent_nodes():
    les = les_of("n2r1K1c11")
    bad = dataclasses.replace(les, delta={**les.delta, 1: np.zeros_like(les.delta[1])})
    rep = exactness_check(bad)
    failed = {ln.name for ln in rep.failures()}
    assert failed == {"H^1(T)", "H^2(Q)"}


def test_maps_are_well_defined(builtin_name):
    m, h = cached_model(builtin_name), cached_hodge(builtin_name)
    assert well_definedness_check(m, h, les_of(builtin_name)).passed


def test_criterion_holds_for_twisted_line_bundle():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    rep = unobstructed_criterion(m, h, les_of("n2r1K1c11"), order=4)
    assert rep.passed
    assert rep.info["verdict"] == "criterion satisfied: unobstructed"
    assert rep.line("delta_1 surjective").status == "holds"


def test_criterion_is_only_sufficient():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    rep = unobstructed_criterion(m, h, les_of("n2r2K0"), order=3)
    assert rep.passed
    assert rep.line("delta_1 surjective").status == "fails"
    # constant vector fields commute, so the tangent obstruction vanishes on the flat torus
    assert rep.line("tangent obstruction on pi*(H^1(A)) vanishes").status == "holds"
    assert "sufficient, not necessary" in rep.info["verdict"]
    assert "nonzero" in rep.info["verdict"]


# -- obstruction diagram --------------------------------------------------------------
@pytest.fixture(scope="module")
def commutator_pair():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    q_dirs = [find(h, "Q", 1, "e12*dzb1"), find(h, "Q", 1, "e21*dzb2")]
    a_dirs = [find(h, "A", 1, "Q:e12*dzb1"), find(h, "A", 1, "Q:e21*dzb2")]
    sol_q = solve_kuranishi(m, h, 4, directions=q_dirs, sector="Q")
    sol_a = solve_kuranishi(m, h, 4, directions=a_dirs)
    return m, h, sol_q, sol_a


def test_endomorphism_directions_commute_through_the_diagram(commutator_pair):
    m, h, sol_q, sol_a = commutator_pair
    rep = obstruction_diagram_check(m, h, sol_q, sol_a, [0.05, 0.05])
    assert rep.passed, rep.to_text()
    paths = rep.info["paths"]
    assert paths["iota*(Ob_Q)"] == pytest.approx(2 * 0.05 * 0.05)
    assert paths["Ob_A(iota* seeds)"] == pytest.approx(2 * 0.05 * 0.05)


def test_tangent_directions_give_zero():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    a_dirs = [find(h, "A", 1, "T:d1*dzb1"), find(h, "A", 1, "T:d2*dzb2")]
    sol_q = solve_kuranishi(m, h, 3, directions=[0, 1], sector="Q")
    sol_a = solve_kuranishi(m, h, 3, directions=a_dirs)
    rep = obstruction_diagram_check(m, h, sol_q, sol_a, [0.05, 0.05])
    assert rep.passed
    assert rep.info["paths"]["pi*(Ob_A)"] == 0 and rep.info["paths"]["Ob_T(pi* seeds)"] == 0


def test_origin_gives_zero(commutator_pair):
    m, h, sol_q, sol_a = commutator_pair
    rep = obstruction_diagram_check(m, h, sol_q, sol_a, [0, 0])
    assert rep.passed and all(v == 0 for v in rep.info["paths"].values())


@pytest.mark.parametrize("name", ["n2r1K1c11", "n2r2K0c11"])
def test_diagram_on_twisted_models(name):
    m, h = cached_model(name), cached_hodge(name)
    sol_q = solve_kuranishi(m, h, 4, directions=[0, 1], sector="Q")
    sol_a = solve_kuranishi(m, h, 4, directions=[0, 1])
    rep = obstruction_diagram_check(m, h, sol_q, sol_a, [0.05, 0.05])
    assert rep.passed, rep.to_text()


def test_incompatible_bases(commutator_pair):
    m, h, sol_q, _ = commutator_pair
    sol_a = solve_kuranishi(m, h, 3, directions=[0, 1, 2])
    with pytest.raises(IncompatibleBasesError):
        obstruction_diagram_check(m, h, sol_q, sol_a, [0.05, 0.05])
    sol_a = solve_kuranishi(m, h, 3, directions=[0, 1])
    sol_t = solve_kuranishi(m, h, 3, directions=[0, 1], sector="T")
    with pytest.raises(IncompatibleBasesError):
        obstruction_diagram_check(m, h, sol_q, sol_a, [0.05, 0.05], sol_t=sol_t)


def test_endomorphism_obstruction_is_trace_free():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    sol_q = solve_kuranishi(m, h, 3, sector="Q")
    assert any(p.max_norm() > 0 for p in sol_q.obstruction)
    rep = trace_free_check(m, h, sol_q)
    assert rep.passed and rep.line("trace component").status == PASS
