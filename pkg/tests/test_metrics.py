"""Metric patches: signature checks, curvature, null fields, pullbacks.

Curvature convention: K = R_1212 / |det g| for a metric with EG - F^2 < 0,
so the G-family 2 dx dy + G(x) dy^2 has K = -G''(x)/2 and the anchor
2xy^2 dx^2 + dx dy has K = -8x.
"""

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorentzlab.errors import SignatureError
from lorentzlab.metrics import (
    Domain,
    MetricPatch,
    TorusDiffeo,
    UNIT_SQUARE,
    UNIT_TORUS,
    ck_distance,
    lightlike_fields,
    metric_csv_string,
    metric_from_csv,
    metric_to_csv,
    pullback,
    random_torus_metric,
    total_curvature,
)


def test_signature_gate():
    with pytest.raises(SignatureError):
        MetricPatch(1, 0, 1, UNIT_SQUARE).curvature(0.5, 0.5)


def test_anchor_curvature(anchor_metric):
    xs = np.array([0.3, 0.7, 1.4])
    got = anchor_metric.curvature(xs, np.array([0.5, 1.0, 1.7]))
    assert np.max(np.abs(got + 8 * xs)) < 1e-12


def test_gfamily_curvature_minus_half_gpp():
    g = MetricPatch(0, 1, "sin(2*pi*x)", UNIT_TORUS)
    xs = np.linspace(0, 1, 17)
    want = 2 * np.pi**2 * np.sin(2 * np.pi * xs)
    got = g.curvature(xs, np.full_like(xs, 0.25))
    assert np.max(np.abs(got - want)) < 1e-10


def test_curvature_grid_spectral_lane():
    sym = MetricPatch(0, 1, "sin(2*pi*x)", UNIT_TORUS)
    sampled = sym.sampled((128, 128))
    Ks = sampled.curvature_grid((128, 128)).values
    Ke = sym.curvature_grid((128, 128)).values
    assert np.max(np.abs(Ks - Ke)) < 1e-8


def test_lightlike_fields_null_and_ordered(flat_torus):
    f0, f1 = lightlike_fields(flat_torus, (16, 16))
    assert f0.family == 0 and f1.family == 1
    xg, yg = UNIT_TORUS.mesh((16, 16))
    for f in (f0, f1):
        th = f.angle(xg, yg)
        assert np.max(np.abs(flat_torus.norm_sq(xg, yg, np.cos(th), np.sin(th)))) < 1e-12
    # 2 dx dy has null directions along the axes
    assert np.max(np.abs(np.mod(f0.angle(xg, yg), np.pi))) < 1e-12
    assert np.max(np.abs(np.mod(f1.angle(xg, yg), np.pi) - np.pi / 2)) < 1e-12


def test_lightlike_fields_smooth_across_sign_change():
    g = MetricPatch(0, 1, "sin(2*pi*x)", UNIT_TORUS)
    f0, f1 = lightlike_fields(g, (64, 64))
    assert f0.smooth and f1.smooth
    for f in (f0, f1):
        jumps = np.abs(np.diff(f.grid_angles, axis=0))
        assert np.max(jumps) < 0.5


def test_total_curvature_vanishes_on_torus(rng):
    for _ in range(3):
        m = random_torus_metric(rng)
        assert abs(total_curvature(m, (128, 128))) < 1e-6


def test_random_torus_metric_is_lorentzian(rng):
    m = random_torus_metric(rng)
    xg, yg = UNIT_TORUS.mesh((64, 64))
    E, F, G = m.component_values(xg, yg)
    assert np.all(E * G - F * F < 0)


def test_pullback_linear_map_curvature_transport():
    g = MetricPatch(0, 1, "sin(2*pi*x)", UNIT_TORUS)
    phi = TorusDiffeo(np.array([[1, 1], [0, 1]]))
    gp = pullback(g, phi)
    pts = np.random.default_rng(5).uniform(0, 1, (24, 2))
    for px, py in pts:
        qx, qy = phi(px, py)
        assert gp.curvature(px, py) == pytest.approx(g.curvature(qx, qy), abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(-2, 2), st.integers(-2, 2), st.integers(-2, 2))
def test_pullback_functoriality(a, b, c):
    # phi, psi unimodular so both stay torus diffeos
    A = np.array([[1, a], [0, 1]]) @ np.array([[1, 0], [b, 1]])
    B = np.array([[1, c], [0, 1]])
    g = MetricPatch(0, 1, "1/5*sin(2*pi*x)", UNIT_TORUS)
    phi, psi = TorusDiffeo(A), TorusDiffeo(B)
    composed = pullback(g, TorusDiffeo(A @ B))
    nested = pullback(pullback(g, phi), psi)
    assert ck_distance(composed, nested, 0, (32, 32)) < 1e-9


def test_ck_distance_zero_and_symmetry(flat_torus):
    g = MetricPatch(0, 1, "1/10*sin(2*pi*x)", UNIT_TORUS)
    assert ck_distance(g, g, 2) == 0
    d1 = ck_distance(flat_torus, g, 1)
    d2 = ck_distance(g, flat_torus, 1)
    assert d1 == pytest.approx(d2, rel=1e-12)
    assert d1 >= ck_distance(flat_torus, g, 0)


def test_csv_round_trip():
    g = MetricPatch(0, 1, "sin(2*pi*x)", UNIT_TORUS, resolution=(16, 16))
    buf = io.StringIO()
    metric_to_csv(g, buf, (16, 16))
    buf.seek(0)
    back = metric_from_csv(buf)
    xg, yg = UNIT_TORUS.mesh((16, 16))
    for k in range(3):
        a = g.component_values(xg, yg)[k]
        b = back.component_values(xg, yg)[k]
        assert np.max(np.abs(np.asarray(a) - np.asarray(b))) < 1e-15
    assert metric_csv_string(g, (4, 4)).startswith("# lorentzian-metric-grid")


def test_domain_wrap_and_axis_points():
    d = Domain((0.0, 2.0, -1.0, 1.0), (True, False))
    x, y = d.wrap(2.75, 0.5)
    assert x == pytest.approx(0.75) and y == 0.5
    assert len(d.axis_points(0, 8)) == 8
    assert d.axis_points(0, 8)[-1] < 2.0  # periodic axis omits the endpoint
    assert d.axis_points(1, 8)[-1] == 1.0
