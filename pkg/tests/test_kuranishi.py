import numpy as np
import pytest

from conftest import cached_hodge, cached_model
from pairdef.dgla import AEForm, AESeriesForm, SectorDGLA, dbar_ae
from pairdef.errors import BandOverflowError, ConfigError, NotFirstOrderDeformation
from pairdef.hodge import build_hodge
from pairdef.kuranishi import (completeness_check, first_order_class, kuranishi_invariants,
                               mc_check, obstruction_map, solve_kuranishi)
from pairdef.models import ModelConfig, build_torus_model, random_form
from pairdef.reports import PASS, VACUOUS
from pairdef.series import TruncatedSeries


def picard(m, h, sector, eta, N):
    """Plain fixed-point iteration eps <- eps1 - 1/2 dbar* G [eps, eps], N rounds."""
    g = SectorDGLA(m, sector)
    eps1 = TruncatedSeries.linear(list(eta), N)
    eps = eps1
    P = -0.5 * h.adjoint(sector, 1) @ h.G(sector, 2)
    for _ in range(N):
        br = eps.bilinear(eps, lambda x, y: g.bracket(1, 1, x, y), shape=(g.dim(2),))
        eps = eps1 + br.map(lambda v: P @ v, shape=(g.dim(1),))
    return eps


def commutator_directions(h, sector):
    labels = [lab.split("@")[0] for lab in h.model.basis_labels(sector, 1)]
    want = ["e12*dzb1", "e21*dzb2"] if sector == "Q" else ["Q:e12*dzb1", "Q:e21*dzb2"]
    out = []
    for w in want:
        hits = [i for i, p in enumerate(h.pivots(sector, 1)) if labels[p] == w]
        out.append(hits[0])
    return out


# -- solver ---------------------------------------------------------------------------
@pytest.mark.parametrize("name", ["n1r1K2", "n1r2K4u"])
def test_curves_are_linear(name):
    m, h = cached_model(name), cached_hodge(name)
    sol = solve_kuranishi(m, h, 4)
    assert sol.epsilon_series == sol.linear_part()
    assert sol.obstruction == []


def test_first_order_solution_is_linear(model, hodge):
    sol = solve_kuranishi(model, hodge, 1)
    assert sol.epsilon_series == sol.linear_part()


def test_commuting_pair_in_endomorphisms():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    dirs = commutator_directions(h, "Q")
    sol = solve_kuranishi(m, h, 3, directions=dirs, sector="Q")
    assert sol.epsilon_series == sol.linear_part()
    oracle = picard(m, h, "Q", sol.eta, 3)
    assert (oracle - sol.epsilon_series).max_norm() == 0


@pytest.mark.parametrize("name, dirs, N", [("n2r1K1c11", None, 4), ("n2r2K0", None, 3),
                                           ("n2r2K0c11", [0, 3, 7], 4)])
def test_recursion_matches_picard_iteration(name, dirs, N):
    m, h = cached_model(name), cached_hodge(name)
    sol = solve_kuranishi(m, h, N, directions=dirs)
    oracle = picard(m, h, "A", sol.eta, N)
    assert (oracle - sol.epsilon_series).max_norm() < 1e-12


@pytest.mark.parametrize("name, dirs, N", [("n1r1K2", None, 6), ("n1r2K4u", None, 6),
                                           ("n2r2K0", [0, 5], 6), ("n2r1K1c11", None, 6),
                                           ("n2r2K0c11", [0, 1, 2], 5)])
def test_solution_invariants(name, dirs, N):
    m, h = cached_model(name), cached_hodge(name)
    sol = solve_kuranishi(m, h, N, directions=dirs)
    rep = kuranishi_invariants(m, sol)
    assert rep.passed, rep.to_text()
    assert all(ln.status == PASS for ln in rep.lines)


def test_raising_the_order_extends_lower_coefficients():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    low = solve_kuranishi(m, h, 3).epsilon_series
    high = solve_kuranishi(m, h, 5).epsilon_series
    assert high.truncate(3) == low


def test_bad_directions_and_order():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    with pytest.raises(ConfigError):
        solve_kuranishi(m, h, 3, directions=[12])
    with pytest.raises(ConfigError):
        solve_kuranishi(m, h, 3, directions=[1, 1])
    with pytest.raises(ConfigError):
        solve_kuranishi(m, h, 0)


def test_band_overflow_names_the_order():
    pot = {(1, 0, 0, 0): 0.1, (-1, 0, 0, 0): 0.1, (0, 0, 0, 1): 0.05j, (0, 0, 0, -1): -0.05j}
    m = build_torus_model(ModelConfig(n=2, r=1, K=1, potential=pot))
    h = build_hodge(m)
    with pytest.raises(BandOverflowError) as info:
        solve_kuranishi(m, h, 3)
    assert info.value.order == 2 and "order 2" in str(info.value)
    sol = solve_kuranishi(m, h, 3, allow_overflow=True)
    assert kuranishi_invariants(m, sol).passed


# -- obstruction ------------------------------------------------------------------------
def test_obstructed_pair():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    dirs = commutator_directions(h, "A")
    sol = solve_kuranishi(m, h, 4, directions=dirs)
    assert sol.obstruction_text() == ["0", "0", "2·t1·t2", "0", "0", "0"]
    assert sol.h2_labels[2].startswith("Q:h1*dzb1^dzb2")
    # oracle: H [eps1, eps1] = 2 t1 t2 H [eta1, eta2] for commuting-free directions
    g = SectorDGLA(m, "A")
    e1, e2 = sol.eta
    coeff = 2 * (h.H("A", 2) @ g.bracket(1, 1, e1, e2))[h.pivots("A", 2)]
    for i, poly in enumerate(sol.obstruction):
        assert abs(poly[(1, 1)] - coeff[i]) < 1e-10
        assert all(abs(c) < 1e-10 for e, c in poly if e != (1, 1))


def test_obstruction_map_recomputes_the_stored_one():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    sol = solve_kuranishi(m, h, 3, directions=[0, 5])
    assert obstruction_map(m, h, sol) == sol.obstruction


def test_twisted_line_bundle_is_unobstructed():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    sol = solve_kuranishi(m, h, 5)
    assert len(sol.obstruction) == h.dim("A", 2)
    assert max(p.max_norm() for p in sol.obstruction) < 1e-10


# -- Maurer-Cartan locus ----------------------------------------------------------------
@pytest.fixture(scope="module")
def obstructed():
    m, h = cached_model("n2r2K0"), cached_hodge("n2r2K0")
    return m, solve_kuranishi(m, h, 4, directions=commutator_directions(h, "A"))


def test_on_axis_both_vanish(obstructed):
    m, sol = obstructed
    rep = mc_check(m, sol, [0.05, 0])
    assert rep.passed and rep.info["on_locus"]
    assert rep.info["mc_norm"] < 1e-6 and rep.info["harmonic_norm"] < 1e-6


def test_off_axis_both_bounded_below(obstructed):
    m, sol = obstructed
    t1, t2 = 0.05, 0.05
    rep = mc_check(m, sol, [t1, t2])
    assert rep.passed and not rep.info["on_locus"]
    # |2 t1 t2 (e11 - e22) dzbar^1 ^ dzbar^2| in the Frobenius pairing
    expected = 2 * t1 * t2 * np.sqrt(2)
    assert rep.info["harmonic_norm"] == pytest.approx(expected, rel=1e-9)
    assert rep.info["mc_norm"] >= 0.5 * expected
    assert min(rep.info["mc_norm"], rep.info["harmonic_norm"]) > 1e-4


def test_origin_is_exactly_zero(obstructed):
    m, sol = obstructed
    rep = mc_check(m, sol, [0, 0])
    assert rep.info["mc_norm"] == 0 and rep.info["harmonic_norm"] == 0


# -- completeness -------------------------------------------------------------------------
@pytest.mark.parametrize("name, dirs", [("n2r1K1c11", None), ("n2r2K0", [0]), ("n1r2K4u", None)])
def test_solver_output_is_complete(name, dirs):
    m, h = cached_model(name), cached_hodge(name)
    sol = solve_kuranishi(m, h, 4, directions=dirs)
    rep = completeness_check(m, h, sol.epsilon)
    assert rep.passed and rep.info["verdict"] == "complete", rep.to_text()


def test_exact_perturbation_is_not_coclosed():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    sol = solve_kuranishi(m, h, 3)
    rng = np.random.default_rng(0)
    v = AEForm.from_vector(m, 0, random_form(m, "A", 0, 1, rng))
    dv = dbar_ae(m, v).vector()
    s = sol.epsilon_series + TruncatedSeries.linear([dv] + [0 * dv] * (sol.num_params - 1), 3)
    rep = completeness_check(m, h, AESeriesForm.from_stacked(m, 1, s))
    assert "not coclosed" in rep.info["verdict"]
    assert rep.line("identity").status == VACUOUS


def test_zero_is_trivially_complete():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    rep = completeness_check(m, h, AESeriesForm.zero(m, 1, 2, 3))
    assert rep.passed


def test_obstructed_output_is_flagged_not_mc(obstructed):
    m, sol = obstructed
    rep = completeness_check(m, sol.hodge, sol.epsilon)
    assert "not MC" in rep.info["verdict"]


# -- first order classes -------------------------------------------------------------------
@pytest.mark.parametrize("name", ["n2r1K1c11", "n1r2K4u", "n2r2K0"])
def test_basis_vectors_have_unit_coordinates(name):
    m, h = cached_model(name), cached_hodge(name)
    for j, eta in enumerate(h.basis("A", 1)):
        c = first_order_class(m, h, AEForm.from_vector(m, 1, eta))
        assert np.array_equal(c, np.eye(len(c))[j])


@pytest.mark.parametrize("name", ["n2r1K1c11", "n1r2K4u"])
def test_gauge_directions_do_not_move_the_class(name):
    m, h = cached_model(name), cached_hodge(name)
    rng = np.random.default_rng(4)
    for j, eta in enumerate(h.basis("A", 1)):
        gauge = AEForm.from_vector(m, 0, random_form(m, "A", 0, m.band, rng))
        w = AEForm.from_vector(m, 1, eta) + dbar_ae(m, gauge)
        assert np.array_equal(first_order_class(m, h, w), np.eye(h.dim("A", 1))[j])


def test_non_closed_input_raises():
    m, h = cached_model("n2r1K1c11"), cached_hodge("n2r1K1c11")
    rng = np.random.default_rng(2)
    w = AEForm.from_vector(m, 1, random_form(m, "A", 1, 1, rng))
    with pytest.raises(NotFirstOrderDeformation):
        first_order_class(m, h, w)


def test_solution_json_schema(obstructed):
    _, sol = obstructed
    js = sol.to_json()
    assert set(js) >= {"eta", "epsilon", "obstruction", "order"}
    assert js["obstruction"][2]["h2_index"] == 2
    assert js["obstruction"][2]["text"] == "2·t1·t2"
