"""The congruence action of words in S, T on flat quadratic forms.

A normalized indefinite binary form corresponds to the hyperbolic-plane
geodesic joining its null slopes; congruence by an integer unimodular
matrix moves the endpoints by the inverse Moebius action.  Rational
slopes give discrete orbits, quadratic-surd slopes give closed ones
(a word stabilizes the form), and generic irrational slopes
equidistribute through the fundamental-domain chart.
"""

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

import lorentzlab.moduli as md
from lorentzlab.approx import anosov_form_exact
from lorentzlab.errors import PreconditionError


PHI = (1.0 + math.sqrt(5.0)) / 2.0


@pytest.fixture(scope="module")
def hyperbolic_form():
    return md.QuadraticForm2(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_act_examples(hyperbolic_form):
    assert np.allclose(md.act(np.eye(2), hyperbolic_form).matrix,
                       hyperbolic_form.matrix)
    QT = md.act(md.GEN_T, hyperbolic_form)
    assert np.allclose(QT.matrix, [[0, 1], [1, 2]])
    gA = md.anosov_fixed_form()
    A = np.array([[2, 1], [1, 1]])
    assert np.max(np.abs(md.act(A, gA).matrix - gA.matrix)) < 1e-15


def test_act_requires_unimodular(hyperbolic_form):
    with pytest.raises(PreconditionError):
        md.act(np.array([[2, 0], [0, 1]]), hyperbolic_form)


def test_exact_stabilizer_word():
    res = md.congruence_residual_exact(md.ANOSOV_STABILIZER_WORD,
                                       anosov_form_exact())
    assert res == sp.zeros(2, 2)
    assert np.array_equal(md.word_matrix(md.ANOSOV_STABILIZER_WORD),
                          [[2, 1], [1, 1]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_det_preserved_under_congruence(seed):
    rng = np.random.default_rng(seed)
    Q = md.form_from_slopes(rng.uniform(-3, 3), rng.uniform(4, 7))
    word = "".join(rng.choice(list("ST"), size=6))
    M = md.word_matrix(word)
    assert abs(md.act(M, Q).det - Q.det) < 1e-12


def test_slopes_and_certificates(hyperbolic_form):
    pair = md.slopes(hyperbolic_form)
    assert pair.values[0] == 0.0 and not np.isfinite(pair.values[1])
    assert pair.rational == (True, True)
    pair_A = md.slopes(md.anosov_fixed_form())
    assert abs(pair_A.values[0] + (math.sqrt(5) + 1) / 2) < 1e-12
    assert abs(pair_A.values[1] - (math.sqrt(5) - 1) / 2) < 1e-12
    assert pair_A.rational == (False, False)
    # slopes really are null
    for Q in (hyperbolic_form, md.anosov_fixed_form()):
        for v in md.slopes(Q).values:
            if np.isfinite(v):
                assert abs(Q(1.0, v)) < 1e-12
            else:
                assert abs(Q(0.0, 1.0)) < 1e-12


def test_continued_fraction_certificates():
    cf = md.continued_fraction(22 / 7)
    assert cf["rational"] and (cf["p"], cf["q"]) == (22, 7)
    cf2 = md.continued_fraction(math.sqrt(2))
    assert not cf2["rational"] and cf2["capped"]


def test_form_from_slopes_round_trip(rng):
    for _ in range(20):
        t1 = rng.uniform(-2, 2)
        t2 = rng.uniform(2.5, 5)
        got = md.slopes(md.form_from_slopes(t1, t2)).values
        assert np.allclose(sorted(got), sorted([t1, t2]), atol=1e-12)
    with pytest.raises(PreconditionError):
        md.form_from_slopes(1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_endpoint_equivariance(seed, length):
    rng = np.random.default_rng(seed)
    Q = md.form_from_slopes(rng.uniform(-2, 2), rng.uniform(2.5, 5))
    word = "".join(rng.choice(list("ST"), size=length))
    M = md.word_matrix(word)
    Minv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])
    got = md.to_modular_geodesic(md.act(M, Q)).endpoints
    want = sorted(md.mobius(Minv, e) for e in md.to_modular_geodesic(Q).endpoints)
    assert np.allclose(got, want, atol=1e-10)


def test_modular_geodesic_landmarks(hyperbolic_form):
    geo = md.to_modular_geodesic(hyperbolic_form)
    assert geo.endpoints[0] == 0.0 and not np.isfinite(geo.endpoints[1])
    assert geo.midpoint() == complex(0, 1)
    geo_A = md.to_modular_geodesic(md.anosov_fixed_form())
    assert abs(geo_A.endpoints[0] - (1 - math.sqrt(5)) / 2) < 1e-12
    assert abs(geo_A.endpoints[1] - (1 + math.sqrt(5)) / 2) < 1e-12


def test_modular_reduce_into_fundamental_domain():
    assert md.modular_reduce(complex(0, 1)) == complex(0, 1)
    z = md.modular_reduce(complex(7.3, 0.01))
    assert abs(z.real) <= 0.5 + 1e-9 and abs(z) >= 1 - 1e-9
    # boundary ties resolve to the left representative
    z = md.modular_reduce(complex(0.5, 2.0))
    assert z.real == pytest.approx(-0.5, abs=1e-12)
    z = md.modular_reduce(complex(0.6, 0.8))
    assert z.real == pytest.approx(-0.5, abs=1e-12)
    assert z.imag == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-8, 8), st.floats(0.05, 4))
def test_modular_reduce_property(re, im):
    z = md.modular_reduce(complex(re, im))
    assert abs(z.real) <= 0.5 + 1e-9
    assert abs(z) >= 1 - 1e-9
    u, t = md.domain_chart(z)
    assert -0.5 <= u <= 0.5 and 0.0 <= t <= 1.0


def test_orbit_probe_rational_floor(hyperbolic_form):
    rows = md.orbit_probe(hyperbolic_form, 8)
    mins = [r["min_displacement"] for r in rows]
    assert all(b <= a + 1e-15 for a, b in zip(mins, mins[1:]))
    assert mins[-1] >= 1.0


def test_orbit_probe_finds_anosov_stabilizer():
    rows = md.orbit_probe(md.anosov_fixed_form(), 4)
    assert rows[-1]["min_displacement"] < 1e-13
    assert len(rows[-1]["word"]) == 4


def test_orbit_probe_generic_decay():
    Q = md.form_from_slopes(math.pi - 3, math.e)
    rows = md.orbit_probe(Q, 8)
    mins = [r["min_displacement"] for r in rows]
    assert mins[-1] < 0.5 * mins[0]
    csv = md.orbit_probe_csv(rows)
    assert csv.splitlines()[0] == "L,min_displacement"
    assert len(csv.splitlines()) == 9


def test_ergodicity_generic_coverage():
    Q = md.form_from_slopes(math.pi - 3, math.e - 3)
    rep = md.ergodicity_statistics(Q, budget=100_000, seed=0)
    assert rep["coverage"] >= 0.95
    assert rep["skipped"] == 0
    assert rep["grid"] == [8, 8] or rep["grid"] == (8, 8)
    assert sum(map(sum, rep["counts"])) + rep["skipped"] == rep["binned"]


def test_ergodicity_separates_closed_orbits():
    generic = md.ergodicity_statistics(
        md.form_from_slopes(math.pi - 3, math.e - 3), budget=20_000, seed=0)
    rational = md.ergodicity_statistics(
        md.QuadraticForm2(np.array([[0.0, 1.0], [1.0, 0.0]])),
        budget=20_000, seed=0)
    anosov = md.ergodicity_statistics(md.anosov_fixed_form(),
                                      budget=20_000, seed=0)
    assert rational["coverage"] < generic["coverage"]
    assert anosov["coverage"] < generic["coverage"]
    js = md.statistics_json(generic)
    assert '"coverage"' in js


def test_ergodicity_budget_gate():
    with pytest.raises(PreconditionError):
        md.ergodicity_statistics(md.anosov_fixed_form(), budget=50)
