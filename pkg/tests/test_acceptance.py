"""Top-level acceptance gate: nine numbered criteria, one per test.

Every test prints a single ``criterion N (...): PASS|FAIL`` line before
asserting, so the table of outcomes survives in the captured output
either way.  Criteria carry both a tolerance and a wall-clock budget.
"""

import math
import time

import numpy as np
import sympy as sp

import lorentzlab.approx as ap
import lorentzlab.moduli as md
import lorentzlab.psl2r as ps
from lorentzlab.geodesics import GeodesicState, exp_map, leaf_holonomy
from lorentzlab.lightlike import annulus_gauss_bonnet, make_annulus
from lorentzlab.metrics import (
    UNIT_TORUS,
    Domain,
    MetricPatch,
    TorusDiffeo,
    ck_distance,
    pullback,
    random_torus_metric,
    total_curvature,
)


def _verdict(num, label, ok):
    line = f"criterion {num} ({label}): {'PASS' if ok else 'FAIL'}"
    print(line)
    return ok


def test_criterion_1_curvature_anchor():
    # h = dxdy + 2xy^2 dx^2, compared against K(x, y) = -x
    t0 = time.time()
    dom = Domain((0.25, 2.0, 0.25, 2.0), (False, False))
    m = MetricPatch("2*x*y^2", "1/2", "0", dom)
    xg, yg = dom.mesh((64, 64))
    target = -xg
    exact_err = float(np.max(np.abs(m.curvature(xg, yg) - target)))
    grid = m.sampled((64, 64))
    spec_err = float(np.max(np.abs(grid.curvature_grid((64, 64)).values
                                   + grid.domain.mesh((64, 64))[0])))
    dt = time.time() - t0
    ok = exact_err < 1e-8 and spec_err < 1e-4 and dt < 1.0
    _verdict(1, "curvature anchor K = -x", ok)
    assert exact_err < 1e-8, f"exact-path error {exact_err:.3g}"
    assert spec_err < 1e-4, f"spectral-path error {spec_err:.3g}"
    assert dt < 1.0


def test_criterion_2_torus_gauss_bonnet():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        g = random_torus_metric(rng).sampled((128, 128))
        worst = max(worst, abs(total_curvature(g, (128, 128))))
    dt = time.time() - t0
    ok = worst < 1e-6 and dt < 10.0
    _verdict(2, "total curvature of random tori", ok)
    assert worst < 1e-6, f"worst |integral| {worst:.3g}"
    assert dt < 10.0, f"took {dt:.2f}s"


def test_criterion_3_lightlike_gauss_bonnet():
    t0 = time.time()
    dom = Domain((0.0, 1.0, 0.0, 1.0), (False, True))
    m = MetricPatch("0", "1", "x*(1 - x)", dom)
    ann = make_annulus(m)
    integral, log_ratio = annulus_gauss_bonnet(ann)
    lam_left = leaf_holonomy(m, ann.left)
    lam_right = leaf_holonomy(m, ann.right)
    log_direct = math.log(lam_left / lam_right)
    dt = time.time() - t0
    ok = (abs(integral - log_ratio) < 1e-3 and abs(integral - 1.0) < 1e-3
          and abs(log_ratio - 1.0) < 1e-3
          and abs(log_direct - log_ratio) < 1e-6 and dt < 5.0)
    _verdict(3, "annulus curvature equals log holonomy ratio", ok)
    assert abs(integral - log_ratio) < 1e-3
    assert abs(integral - 1.0) < 1e-3
    assert abs(log_ratio - 1.0) < 1e-3
    assert abs(log_direct - log_ratio) < 1e-6
    assert dt < 5.0, f"took {dt:.2f}s"


def test_criterion_4_anosov_rates():
    t0 = time.time()
    system = ap.AnosovSystem(epsilon=0.1, n_max=8)
    rows = ap.anosov_experiment(system, shape=(256, 256), lane="symbolic")
    verdict = ap.check_anosov_rates(rows, lo=3, hi=8, rel=0.05, band=2.0)
    dt = time.time() - t0
    ok = verdict["ok"] and dt < 30.0
    _verdict(4, "pullback decay rates", ok)
    assert verdict["c0_ratio_dev"] < 0.05, verdict
    assert verdict["c1_ratio_dev"] < 0.05, verdict
    assert verdict["c2_band_factor"] < 2.0, verdict
    assert verdict["ok"]
    assert dt < 30.0, f"took {dt:.2f}s"


def test_criterion_5_as_field_linear_witness():
    t0 = time.time()
    g = ap.anosov_form()
    h = MetricPatch(float(g[0, 0]), float(g[0, 1]), float(g[1, 1]),
                    domain=UNIT_TORUS, resolution=64)
    field = ap.as_field_estimate(h, TorusDiffeo(ap.ANOSOV_MATRIX), 8,
                                 shape=(64, 64))
    xg, yg = UNIT_TORUS.mesh((64, 64))
    th = field.angle(xg, yg)
    target = math.atan2(-(1.0 + math.sqrt(5.0)) / 2.0, 1.0)
    gap = np.abs((th - target + np.pi / 2) % np.pi - np.pi / 2)
    angle_err = float(np.max(gap))
    rep = ap.as_field_report(h, field, shape=(64, 64))
    dt = time.time() - t0
    ok = (angle_err < 1e-6 and rep["max_null_residual"] < 1e-8
          and rep["geodesic_residual"] < 1e-6 and dt < 10.0)
    _verdict(5, "approximately stable field of the cat map", ok)
    assert angle_err < 1e-6, f"angle error {angle_err:.3g}"
    assert rep["max_null_residual"] < 1e-8
    assert rep["geodesic_residual"] < 1e-6
    assert dt < 10.0, f"took {dt:.2f}s"


def test_criterion_6_form_reduction():
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst_res = 0.0
    worst_ratio = 0.0
    for idx in range(1000):
        dim = 2 + (idx % 2)
        J = np.diag([1.0] * (dim - 1) + [-1.0])
        R = np.eye(dim) + 0.25 * rng.uniform(-1.0, 1.0, (dim, dim))
        H = R.T @ J @ R
        D = rng.uniform(-1.0, 1.0, (dim, dim))
        D = 0.5 * (D + D.T)
        delta = 1e-2 * rng.uniform(0.1, 1.0)
        D *= delta / np.linalg.norm(D)
        Hn = H + D
        M = ap.reduce_to_base(H, Hn)
        res = np.linalg.norm(M.T @ H @ M - Hn)
        offset = np.linalg.norm(M - np.eye(dim))
        worst_res = max(worst_res, res)
        worst_ratio = max(worst_ratio, offset / np.linalg.norm(D))
    dt = time.time() - t0
    ok = worst_res < 1e-12 and worst_ratio <= 5.0 and dt < 2.0
    _verdict(6, "base-point reduction of perturbed forms", ok)
    assert worst_res < 1e-12, f"worst residual {worst_res:.3g}"
    assert worst_ratio <= 5.0, f"worst offset ratio {worst_ratio:.3g}"
    assert dt < 2.0, f"took {dt:.2f}s"


def test_criterion_7_moduli_trichotomy():
    t0 = time.time()
    rational = md.QuadraticForm2(np.array([[0.0, 1.0], [1.0, 0.0]]))
    rows = md.orbit_probe(rational, 8)
    floor = rows[-1]["min_displacement"]
    res = md.congruence_residual_exact(md.ANOSOV_STABILIZER_WORD,
                                       ap.anosov_form_exact())
    stab_exact = res == sp.zeros(2, 2)
    generic = md.form_from_slopes(math.pi - 3.0, math.e - 3.0)
    stats = md.ergodicity_statistics(generic, budget=100_000, seed=0)
    dt = time.time() - t0
    ok = (floor >= 1.0 and stab_exact and stats["coverage"] >= 0.95
          and dt < 60.0)
    _verdict(7, "orbit trichotomy on the flat moduli space", ok)
    assert floor >= 1.0, f"rational orbit floor {floor:.3g}"
    assert stab_exact
    assert stats["coverage"] >= 0.95, stats["coverage"]
    assert dt < 60.0, f"took {dt:.2f}s"


def test_criterion_8_psl2r_classifier():
    t0 = time.time()
    table = ps.sequence_experiment(1, 1, 1, range(2, 101))
    all_full = all(r["verdict"] == "FullTimesZ2" for r in table["rows"])
    limit_left = table["limit"]["verdict"] == "LeftOnly"
    lanes_agree = True
    for n in (2, 10, 100, None):
        m = ps.sequence_metric(1, 1, 1, n)
        try:
            vf = ps.classify(m, lane="float").verdict
            vx = ps.classify(m, lane="exact").verdict
        except Exception:
            continue
        lanes_agree = lanes_agree and (vf is vx)
    plane = ps.common_lightlike_plane(ps.sequence_metric(1, 1, 1, None))
    Hm = ps.sequence_metric(1, 1, 1, None).matrix
    K = ps.killing_matrix()
    degenerate = all(
        abs(np.linalg.det(plane.basis.T @ form @ plane.basis)) < 1e-10
        for form in (Hm, K))
    dt = time.time() - t0
    ok = all_full and limit_left and lanes_agree and degenerate and dt < 1.0
    _verdict(8, "isometry classification of the metric family", ok)
    assert all_full
    assert limit_left
    assert lanes_agree
    assert degenerate
    assert dt < 1.0, f"took {dt:.2f}s"


def test_criterion_9_property_suites():
    rng = np.random.default_rng(11)
    ok = True

    # signature preserved under congruence
    for _ in range(25):
        R = np.eye(2) + 0.4 * rng.uniform(-1, 1, (2, 2))
        H = R.T @ np.array([[0.0, 1.0], [1.0, 0.0]]) @ R
        ok = ok and ap.form_signature(H) == (1, 1)

    # pullback functoriality
    g = MetricPatch("0", "1", "sin(2*pi*x)")
    A = np.array([[1, 1], [0, 1]])
    B = np.array([[1, 0], [1, 1]])
    composed = pullback(g, TorusDiffeo(A @ B))
    nested = pullback(pullback(g, TorusDiffeo(A)), TorusDiffeo(B))
    ok = ok and ck_distance(composed, nested, 0, (32, 32)) < 1e-9

    # curvature equivariance under pullback
    phi = TorusDiffeo(A)
    gp = pullback(g, phi)
    xg, yg = UNIT_TORUS.mesh((24, 24))
    fx, fy = phi(xg, yg)
    ok = ok and float(np.max(np.abs(
        gp.curvature(xg, yg) - g.curvature(*UNIT_TORUS.wrap(fx, fy))))) < 1e-8

    # null speed conserved along null geodesics of the anchor metric
    dom = Domain((0.1, 3.0, 0.1, 3.0), (False, False))
    m = MetricPatch("2*x*y^2", "1/2", "0", dom)
    th = m.lightlike_angles(0.8, 1.0)[0]
    s1 = exp_map(m, GeodesicState(0.8, 1.0, np.cos(th), np.sin(th)), 0.4)
    ok = ok and abs(m.norm_sq(s1.x, s1.y, s1.u, s1.v)) < 1e-8

    # polar splitting reconstructs the input exactly
    for _ in range(25):
        R = np.eye(2) + 0.3 * rng.uniform(-1, 1, (2, 2))
        H = R.T @ np.array([[0.0, 1.0], [1.0, 0.0]]) @ R
        M = np.eye(2) + 0.2 * rng.uniform(-1, 1, (2, 2))
        I_mat, P_mat = ap.h_polar(H, M)
        ok = ok and np.linalg.norm(I_mat @ P_mat - M) < 1e-10
        ok = ok and np.linalg.norm(I_mat.T @ H @ I_mat - H) < 1e-9

    _verdict(9, "cross-module invariant properties", ok)
    assert ok
