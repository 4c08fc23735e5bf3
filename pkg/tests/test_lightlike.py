"""Lightlike frames, the annulus Gauss-Bonnet identity, flatness scans.

For the G-family 2 dx dy + G(x) dy^2 the connection form of the frame
(X, Y) = (del_x, del_y) integrates along the strip to

    integral of K dv = -(G'(hi) - G'(lo)) / 2 = log(lambda_lo / lambda_hi),

the log ratio of the boundary-circle holonomies.  Flat metrics are the
ones whose lightlike foliations keep transverse functions constant.
"""

import numpy as np
import pytest

from lorentzlab.errors import PeriodicityError, PreconditionError
from lorentzlab.lightlike import (
    annulus_gauss_bonnet,
    connection_form,
    constancy_deviation,
    flatness_experiment,
    make_annulus,
)
from lorentzlab.metrics import Domain, MetricPatch, UNIT_TORUS, random_torus_metric


def test_flat_frame_connection_vanishes(flat_torus):
    fr = connection_form(flat_torus, family=0, shape=(64, 64))
    res = fr.frame_residuals()
    assert res["null_X"] < 1e-12 and res["pairing"] < 1e-12
    assert np.max(np.abs(fr.omega_x.values)) < 1e-12
    assert np.max(np.abs(fr.omega_y.values)) < 1e-12
    assert fr.curl_defect() < 1e-10


def test_conformal_factor_shows_up_in_omega():
    # for 2F dxdy the X = del_x frame has omega = d_x(ln F) dx
    conf = MetricPatch(0, "(1 + 3/10*sin(2*pi*x)*cos(2*pi*y))/2", 0, UNIT_TORUS)
    fr = connection_form(conf, family=0, shape=(128, 128))
    xg, yg = conf.domain.mesh((128, 128))
    F = 1 + 0.3 * np.sin(2 * np.pi * xg) * np.cos(2 * np.pi * yg)
    Fx = 0.3 * 2 * np.pi * np.cos(2 * np.pi * xg) * np.cos(2 * np.pi * yg)
    assert np.max(np.abs(fr.omega_x.values - Fx / F)) < 1e-10
    assert np.max(np.abs(fr.omega_y.values)) < 1e-10


def test_frame_rescaling_shifts_omega_by_exact_form():
    conf = MetricPatch(0, "(1 + 3/10*sin(2*pi*x)*cos(2*pi*y))/2", 0, UNIT_TORUS)
    base = connection_form(conf, family=0, shape=(128, 128))
    scaled = connection_form(conf, family=0, shape=(128, 128),
                             scale="exp(1/10*sin(2*pi*(x+y)))")
    xg, yg = conf.domain.mesh((128, 128))
    dlnr = 0.1 * 2 * np.pi * np.cos(2 * np.pi * (xg + yg))
    assert np.max(np.abs(scaled.omega_x.values - base.omega_x.values - dlnr)) < 1e-9
    assert np.max(np.abs(scaled.omega_y.values - base.omega_y.values - dlnr)) < 1e-9
    # the curl (hence the curvature) is gauge invariant
    assert scaled.curl_defect() < 1e-7


def test_flat_annulus_gauss_bonnet():
    dom = Domain((0.0, 1.0, 0.0, 1.0), (False, True))
    a = make_annulus(MetricPatch(0, 1, 0, dom))
    integral, log_ratio = annulus_gauss_bonnet(a)
    assert abs(integral) < 1e-10 and abs(log_ratio) < 1e-10


def test_chart_annulus_gauss_bonnet(chart_metric):
    a = make_annulus(chart_metric)
    integral, log_ratio = annulus_gauss_bonnet(a)
    assert integral == pytest.approx(1.0, abs=1e-8)
    assert log_ratio == pytest.approx(1.0, abs=1e-8)


def test_torus_annulus_between_sign_changes():
    g = MetricPatch(0, 1, "sin(2*pi*x)", UNIT_TORUS)
    a = make_annulus(g, strip_range=(0.0, 1.0), strip_axis=0)
    integral, log_ratio = annulus_gauss_bonnet(a)
    # over a full period the two boundary circles are the same leaf
    assert abs(integral) < 1e-9 and abs(log_ratio) < 1e-9


def test_make_annulus_preconditions():
    with pytest.raises(PeriodicityError):
        make_annulus(MetricPatch(0, 1, 0, Domain((0, 1, 0, 1), (False, False))))
    dom = Domain((0.0, 1.0, 0.0, 1.0), (False, True))
    with pytest.raises(PreconditionError):
        # x = 0.3 circle is not lightlike for the chart profile
        make_annulus(MetricPatch(0, 1, "x*(1-x)", dom), strip_range=(0.3, 1.0))


def test_constancy_deviation_oracles(anchor_metric, flat_torus):
    # K = -8x is constant along the vertical leaves of the anchor metric
    dev = constancy_deviation(anchor_metric, anchor_metric.curvature, 0,
                              seeds=8, n_nodes=129)
    assert dev < 1e-7
    # the coordinate x oscillates with amplitude ~1 along horizontal leaves
    devx = constancy_deviation(flat_torus, lambda x, y: x, 0, seeds=4, n_nodes=513)
    assert abs(devx - 1.0) < 0.02
    const = lambda x, y: np.full_like(np.asarray(x, dtype=float), 3.7)
    assert constancy_deviation(flat_torus, const, 1, seeds=4) < 1e-14


def test_flatness_experiment_dichotomy(rng):
    fam = [
        MetricPatch(0, "1/2", 0, UNIT_TORUS),
        MetricPatch(0, 1, "1/5*sin(2*pi*x)", UNIT_TORUS),
        random_torus_metric(rng),
    ]
    recs = flatness_experiment(fam, ids=["flat", "gfam", "rand"], seeds=8)
    assert [r["metric_id"] for r in recs] == ["flat", "gfam", "rand"]
    assert recs[0]["dev_family0"] < 1e-8 and recs[0]["max_abs_K"] < 1e-10
    assert recs[1]["dev_family0"] > 0.1 and recs[1]["max_abs_K"] > 0.1
    assert recs[2]["dev_family0"] > 1e-3 and recs[2]["max_abs_K"] > 1e-3
    # Gauss-Bonnet residual is a cross-check, not a discriminator
    assert all(r["gb_residual"] < 1e-8 for r in recs)
