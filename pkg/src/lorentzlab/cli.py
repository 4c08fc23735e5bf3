"""Command-line front end: one subcommand per experiment.

Configuration is plain ``key=value`` text, given as positional arguments
or in a file via ``--config`` (with ``include=PATH`` nesting).  Artifacts
are CSV or JSON with every float printed as %.17g, so identical
configuration and seed produce byte-identical output.  When ``--out`` is
given, figures are rendered next to the artifact unless ``--no-plot``.

Exit codes: 0 success, 1 unparsable configuration (with line and column),
2 violated precondition, 3 a ``--assert`` check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import approx, geodesics, lightlike, metrics, moduli, psl2r, report
from .errors import ExpressionError, LorentzLabError, PreconditionError

_INCLUDE_DEPTH_LIMIT = 8


def _fmt(value):
    return f"{float(value):.17g}"


class ConfigError(Exception):
    """Unparsable configuration text, pointing at the offending spot."""

    def __init__(self, source, line, col, message):
        super().__init__(f"{source}:{line}:{col}: {message}")
        self.source = source
        self.line = line
        self.col = col


def _parse_config_text(text, source, out, depth, seen):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError(source, lineno, col, "expected key=value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(source, lineno, 1, "empty key before '='")
        if not value:
            col = raw.index("=") + 2
            raise ConfigError(source, lineno, col, f"empty value for key {key!r}")
        if key == "include":
            if depth >= _INCLUDE_DEPTH_LIMIT:
                raise ConfigError(source, lineno, 1, "include nesting too deep")
            base = os.path.dirname(source) if os.path.exists(source) else "."
            path = value if os.path.isabs(value) else os.path.join(base or ".", value)
            real = os.path.realpath(path)
            if real in seen:
                raise ConfigError(source, lineno, 1, f"include cycle through {value!r}")
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    sub = fh.read()
            except OSError as exc:
                raise ConfigError(source, lineno, 1, f"cannot read include {value!r}: {exc}")
            _parse_config_text(sub, path, out, depth + 1, seen | {real})
        else:
            out[key] = value


def load_config(settings, config_path=None):
    """Merge a config file and positional key=value pairs, later wins."""
    cfg = {}
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(config_path, 1, 1, f"cannot read config file: {exc}")
        _parse_config_text(text, config_path, cfg, 0, {os.path.realpath(config_path)})
    for idx, token in enumerate(settings, start=1):
        _parse_config_text(token, f"argument {idx}", cfg, 0, set())
    return cfg


def _reject_unknown(cfg):
    if cfg:
        keys = ", ".join(sorted(cfg))
        raise PreconditionError(f"unknown config key(s): {keys}")


def _int_value(text, key):
    try:
        return int(str(text).strip())
    except ValueError:
        raise PreconditionError(f"config {key}={text!r} is not an integer")


def _float_value(text, key):
    try:
        return float(str(text).strip())
    except ValueError:
        raise PreconditionError(f"config {key}={text!r} is not a number")


_SLOPE_TOKENS = {
    "pi": math.pi,
    "pi-3": math.pi - 3.0,
    "e": math.e,
    "e-3": math.e - 3.0,
    "sqrt2": math.sqrt(2.0),
    "golden": (1.0 + math.sqrt(5.0)) / 2.0,
    "golden-conj": (1.0 - math.sqrt(5.0)) / 2.0,
    "inf": math.inf,
}


def _slope_value(text, key):
    token = str(text).strip().lower()
    if token in _SLOPE_TOKENS:
        return _SLOPE_TOKENS[token]
    if token.startswith("-") and token[1:] in _SLOPE_TOKENS:
        return -_SLOPE_TOKENS[token[1:]]
    try:
        return float(Fraction(token))
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return float(token)
    except ValueError:
        named = ", ".join(sorted(_SLOPE_TOKENS))
        raise PreconditionError(
            f"config {key}={text!r} is not a slope: use a number, a fraction "
            f"p/q, or one of {named}")


_DOMAIN_TOKENS = {
    "torus": metrics.UNIT_TORUS,
    "square": metrics.UNIT_SQUARE,
    "cylinder": metrics.Domain((0.0, 1.0, 0.0, 1.0), (False, True)),
}


def _domain_value(text):
    token = str(text).strip().lower()
    if token not in _DOMAIN_TOKENS:
        named = ", ".join(sorted(_DOMAIN_TOKENS))
        raise PreconditionError(f"domain must be one of {named}, got {text!r}")
    return _DOMAIN_TOKENS[token]


def _metric_from_config(cfg, defaults, domain_default, resolution):
    e_text = cfg.pop("E", defaults[0])
    f_text = cfg.pop("F", defaults[1])
    g_text = cfg.pop("G", defaults[2])
    dom = _domain_value(cfg.pop("domain", domain_default))
    return metrics.MetricPatch(e_text, f_text, g_text, domain=dom,
                               resolution=resolution)


# ---- JSON with %.17g floats ----------------------------------------------------


def _json_text(obj):
    out = []
    _json_write(obj, out, 0)
    out.append("\n")
    return "".join(out)


def _json_write(obj, out, indent):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        out.append("{\n")
        for i, (k, v) in enumerate(items):
            out.append("  " * (indent + 1) + json.dumps(str(k)) + ": ")
            _json_write(v, out, indent + 1)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append("  " * (indent + 1))
            _json_write(v, out, indent + 1)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append("true" if obj is True else "false" if obj is False else "null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            out.append('"nan"')
        elif math.isinf(v):
            out.append('"inf"' if v > 0 else '"-inf"')
        else:
            out.append(_fmt(v))
    elif isinstance(obj, str):
        out.append(json.dumps(str(obj)))
    else:
        out.append(json.dumps(str(obj)))


# ---- subcommand handlers -------------------------------------------------------


def _cmd_curvature_map(args, cfg):
    n = args.grid or 64
    metric = _metric_from_config(cfg, ("2*x*y^2", "1/2", "0"), "square", n)
    _reject_unknown(cfg)
    grid = metric.curvature_grid((n, n))
    xs = metric.domain.axis_points(0, n)
    ys = metric.domain.axis_points(1, n)
    K = grid.values
    lines = ["x\\y," + ",".join(_fmt(y) for y in ys)]
    for i, x in enumerate(xs):
        lines.append(_fmt(x) + "," + ",".join(_fmt(v) for v in K[i, :]))
    text = "\n".join(lines) + "\n"
    figures = [("K", lambda path: report.save_heatmap(
        path, K, metric.domain.bounds, "Gauss curvature", cbar_label="K"))]
    checks = []
    if args.do_assert:
        tol = args.tol if args.tol is not None else 1e-4
        i = int(np.argmin(np.abs(xs - 0.3)))
        col = K[i, :]
        spread = float(np.max(col) - np.min(col))
        checks.append(("column constant along y near x=0.3", spread <= tol,
                       f"spread {spread:.3g} at x={xs[i]:.6g}"))
        dev = float(np.max(np.abs(col + xs[i])))
        checks.append(("column value equals -x near x=0.3", dev <= tol,
                       f"max |K - (-x)| = {dev:.3g} at x={xs[i]:.6g}"))
    return {"text": text, "ext": "csv", "figures": figures, "checks": checks}


def _cmd_lightlike_fields(args, cfg):
    n = args.grid or 64
    metric = _metric_from_config(cfg, ("0", "1", "sin(2*pi*x)"), "torus", n)
    _reject_unknown(cfg)
    f0, f1 = metrics.lightlike_fields(metric, (n, n))
    b = metric.domain.bounds
    xs = np.linspace(b[0], b[1], n + 1)
    ys = np.linspace(b[2], b[3], n + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    a0 = np.asarray(f0.angle(xg, yg))
    a1 = np.asarray(f1.angle(xg, yg))
    lines = ["x,y,angle0,angle1"]
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            lines.append(",".join(_fmt(v) for v in (x, y, a0[i, j], a1[i, j])))
    text = "\n".join(lines) + "\n"
    figures = [
        ("family0", lambda path: report.save_heatmap(
            path, a0, b, "Lightlike angle, family 0", cbar_label="angle")),
        ("family1", lambda path: report.save_heatmap(
            path, a1, b, "Lightlike angle, family 1", cbar_label="angle")),
    ]
    checks = []
    if args.do_assert:
        tol = args.tol if args.tol is not None else 1e-8
        wx, wy = metric.domain.wrap(xg, yg)
        worst = 0.0
        for th in (a0, a1):
            null = metric.norm_sq(wx, wy, np.cos(th), np.sin(th))
            worst = max(worst, float(np.max(np.abs(null))))
        checks.append(("null residual of both fields", worst <= tol,
                       f"max |h(X,X)| = {worst:.3g}"))
        jump = max(
            float(np.max(np.abs(np.diff(a, axis=ax))))
            for a in (a0, a1) for ax in (0, 1))
        checks.append(("angle grids vary continuously", jump <= 0.5,
                       f"largest neighbor jump {jump:.3g} rad"))
    return {"text": text, "ext": "csv", "figures": figures, "checks": checks}


def _cmd_gauss_bonnet(args, cfg):
    g_text = cfg.pop("G", "x*(1 - x)")
    _reject_unknown(cfg)
    quad_n = args.grid or 96
    dom = metrics.Domain((0.0, 1.0, 0.0, 1.0), (False, True))
    metric = metrics.MetricPatch("0", "1", g_text, domain=dom, resolution=128)
    annulus = lightlike.make_annulus(metric)
    integral, log_ratio = lightlike.annulus_gauss_bonnet(annulus, quad_n=quad_n)
    lam_left = geodesics.leaf_holonomy(metric, annulus.left)
    lam_right = geodesics.leaf_holonomy(metric, annulus.right)
    payload = {
        "profile": g_text,
        "curvature_integral": integral,
        "lambda_left": lam_left,
        "lambda_right": lam_right,
        "log_holonomy_ratio": log_ratio,
        "difference": integral - log_ratio,
    }
    text = _json_text(payload)
    xs = np.linspace(0.0, 1.0, 257)
    g_vals = metric.component_values(xs, np.full_like(xs, 0.5))[2]
    k_vals = np.broadcast_to(metric.curvature(xs, np.full_like(xs, 0.5)), xs.shape)
    figures = [("profile", lambda path: report.save_series(
        path, xs, {"G(x)": g_vals, "K(x)": k_vals}, "x", "value",
        "Annulus profile and curvature"))]
    checks = []
    if args.do_assert:
        tol = args.tol if args.tol is not None else 1e-3
        diff = abs(integral - log_ratio)
        checks.append(("curvature integral matches log holonomy ratio",
                       diff <= tol, f"|difference| = {diff:.3g}"))
        if g_text == "x*(1 - x)":
            d1 = abs(integral - 1.0)
            checks.append(("integral near 1 for the parabolic profile",
                           d1 <= 1e-3, f"|integral - 1| = {d1:.3g}"))
            d2 = abs(log_ratio - 1.0)
            checks.append(("log holonomy ratio near 1 for the parabolic profile",
                           d2 <= 1e-3, f"|log ratio - 1| = {d2:.3g}"))
    return {"text": text, "ext": "json", "figures": figures, "checks": checks}


def _cmd_flatness_scan(args, cfg):
    count = _int_value(cfg.pop("count", "2"), "count")
    amplitude = _float_value(cfg.pop("amplitude", "0.2"), "amplitude")
    harmonics = _int_value(cfg.pop("harmonics", "2"), "harmonics")
    seeds = _int_value(cfg.pop("seeds", "8"), "seeds")
    _reject_unknown(cfg)
    if count < 0:
        raise PreconditionError("count must be nonnegative")
    n = args.grid or 96
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    mets = [metrics.MetricPatch("0", "1", "0", domain=metrics.UNIT_TORUS)]
    ids = ["flat-reference"]
    for k in range(count):
        mets.append(metrics.random_torus_metric(
            rng, harmonics=harmonics, amplitude=amplitude))
        ids.append(f"random-{k}")
    records = lightlike.flatness_experiment(mets, ids=ids, seeds=seeds,
                                            shape=(n, n))
    lines = ["metric_id,dev_family0,dev_family1,max_abs_K,gb_residual"]
    for r in records:
        lines.append(",".join([r["metric_id"]] + [
            _fmt(r[k]) for k in
            ("dev_family0", "dev_family1", "max_abs_K", "gb_residual")]))
    text = "\n".join(lines) + "\n"
    devs = [max(r["dev_family0"], r["dev_family1"]) for r in records]
    ks = [r["max_abs_K"] for r in records]
    figures = [("scan", lambda path: report.save_scatter(
        path, ks, devs, "max |K|", "foliation deviation",
        "Constancy deviation against curvature"))]
    checks = []
    if args.do_assert:
        flat = records[0]
        ok_flat = (max(flat["dev_family0"], flat["dev_family1"]) <= 1e-6
                   and flat["max_abs_K"] <= 1e-10)
        checks.append(("flat reference has constant foliations", ok_flat,
                       f"dev {max(flat['dev_family0'], flat['dev_family1']):.3g}, "
                       f"max |K| {flat['max_abs_K']:.3g}"))
        bad = [r["metric_id"] for r in records
               if max(r["dev_family0"], r["dev_family1"]) < 1e-3
               and r["max_abs_K"] > 1e-2]
        checks.append(("no curved metric with stable foliations", not bad,
                       "offenders: " + (",".join(bad) if bad else "none")))
    return {"text": text, "ext": "csv", "figures": figures, "checks": checks}


def _cmd_anosov_rates(args, cfg):
    eps = args.eps if args.eps is not None else 0.1
    nmax = args.nmax or 8
    n = args.grid or 256
    lane = cfg.pop("lane", "symbolic")
    profile = cfg.pop("profile", None)
    _reject_unknown(cfg)
    system = approx.AnosovSystem(epsilon=eps, profile=profile, n_max=nmax)
    rows = approx.anosov_experiment(system, shape=(n, n), lane=lane)
    text = approx.rate_table_csv(rows)
    ns = [r["n"] for r in rows]
    series = {key: [r[key] for r in rows] for key in ("c0", "c1", "c2")}
    figures = [("decay", lambda path: report.save_series(
        path, ns, series, "n", "C^k distance to the fixed form",
        "Pullback decay rates", logy=True))]
    checks = []
    if args.do_assert:
        rel = args.tol if args.tol is not None else 0.05
        summary = approx.check_anosov_rates(rows, lo=3, hi=min(8, nmax), rel=rel)
        lam = (3.0 + math.sqrt(5.0)) / 2.0
        checks.append((f"C^0 ratios within {rel:g} of {lam**-2:.5f}",
                       summary["c0_ratio_dev"] <= rel,
                       f"worst relative deviation {summary['c0_ratio_dev']:.3g}"))
        checks.append((f"C^1 ratios within {rel:g} of {lam**-1:.5f}",
                       summary["c1_ratio_dev"] <= rel,
                       f"worst relative deviation {summary['c1_ratio_dev']:.3g}"))
        checks.append(("C^2 distances stall inside a factor-2 band",
                       summary["c2_band_factor"] <= 2.0,
                       f"band factor {summary['c2_band_factor']:.3g}"))
    return {"text": text, "ext": "csv", "figures": figures, "checks": checks}


def _cmd_as_field(args, cfg):
    nmax = args.nmax or 8
    n = args.grid or 64
    _reject_unknown(cfg)
    g = approx.anosov_form()
    h = metrics.MetricPatch(float(g[0, 0]), float(g[0, 1]), float(g[1, 1]),
                            domain=metrics.UNIT_TORUS, resolution=n)
    phi = metrics.TorusDiffeo(approx.ANOSOV_MATRIX)
    field = approx.as_field_estimate(h, phi, nmax, shape=(n, n))
    b = h.domain.bounds
    xs = np.linspace(b[0], b[1], n + 1)
    ys = np.linspace(b[2], b[3], n + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="ij")
    angles = np.asarray(field.angle(xg, yg))
    lines = ["x,y,angle"]
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            lines.append(",".join(_fmt(v) for v in (x, y, angles[i, j])))
    text = "\n".join(lines) + "\n"
    figures = [("angle", lambda path: report.save_heatmap(
        path, np.mod(angles, np.pi), b, "Approximately stable direction",
        cbar_label="angle mod pi"))]
    checks = []
    if args.do_assert:
        tol = args.tol if args.tol is not None else 1e-6
        target = math.atan2(-(1.0 + math.sqrt(5.0)) / 2.0, 1.0) % math.pi
        delta = np.mod(angles - target, np.pi)
        dev = float(np.max(np.minimum(delta, np.pi - delta)))
        checks.append(("field matches the contracting eigendirection",
                       dev <= tol, f"max angle gap {dev:.3g} rad"))
        rep = approx.as_field_report(h, field, shape=(n, n))
        checks.append(("field is lightlike for the fixed form",
                       rep["max_null_residual"] <= 1e-8,
                       f"max |h(X,X)| = {rep['max_null_residual']:.3g}"))
        checks.append(("integral curves are pregeodesic",
                       rep["geodesic_residual"] <= 1e-6,
                       f"residual {rep['geodesic_residual']:.3g}"))
    return {"text": text, "ext": "csv", "figures": figures, "checks": checks}


def _cmd_moduli_orbit(args, cfg):
    slope1 = _slope_value(cfg.pop("slope1", "pi-3"), "slope1")
    slope2 = _slope_value(cfg.pop("slope2", "e"), "slope2")
    _reject_unknown(cfg)
    radius = args.nmax or 8
    budget = args.budget or 100_000
    seed = args.seed if args.seed is not None else 0
    gridn = args.grid or 8
    Q = moduli.form_from_slopes(slope1, slope2)
    probe = moduli.orbit_probe(Q, radius)
    stats = moduli.ergodicity_statistics(Q, budget=budget,
                                         grid=(gridn, gridn), seed=seed)
    pair = moduli.slopes(Q)
    payload = {
        "form": {"a": Q.matrix[0, 0], "b": Q.matrix[0, 1], "c": Q.matrix[1, 1]},
        "slopes": list(pair.values),
        "slopes_rational": list(pair.rational),
        "probe": probe,
        "statistics": stats,
    }
    text = _json_text(payload)
    counts = np.asarray(stats["counts"], dtype=float)
    ls = [r["L"] for r in probe]
    mins = [r["min_displacement"] for r in probe]
    figures = [
        ("occupancy", lambda path: report.save_occupancy(
            path, counts, "Orbit occupancy of the reduced domain chart")),
        ("probe", lambda path: report.save_series(
            path, ls, {"min displacement": mins}, "word length",
            "min ||M^T Q M - Q||", "Congruence displacement minima",
            logy=min(mins) > 0)),
    ]
    checks = []
    if args.do_assert:
        min_disp = probe[-1]["min_displacement"]
        if all(pair.rational):
            ok = min_disp >= 1.0 - 1e-12
            checks.append(("rational slopes keep the orbit discrete",
                           ok, f"min displacement {min_disp:.6g} at radius {radius}"))
        elif min_disp < 1e-9:
            checks.append(("a word stabilizes the form",
                           True, f"word {probe[-1]['word']!r} "
                           f"displacement {min_disp:.3g}"))
        else:
            cov = stats["coverage"]
            ok = cov >= 0.95
            checks.append(("orbit spreads over the domain chart",
                           ok, f"coverage {cov:.4f} of {gridn}x{gridn} cells"))
    return {"text": text, "ext": "json", "figures": figures, "checks": checks}


def _cmd_classify_psl2r(args, cfg):
    family_keys = {"alpha", "gamma", "delta"}
    if family_keys & set(cfg):
        alpha = _float_value(cfg.pop("alpha", "1"), "alpha")
        gamma = _float_value(cfg.pop("gamma", "1"), "gamma")
        delta = _float_value(cfg.pop("delta", "1"), "delta")
        _reject_unknown(cfg)
        nmax = args.nmax or 100
        if nmax < 2:
            raise PreconditionError("nmax must be at least 2 for the family table")
        table = psl2r.sequence_experiment(alpha, gamma, delta, range(2, nmax + 1))
        text = _json_text(table)
        ns = [r["n"] for r in table["rows"]]
        lens = {len(r["eigenvalues"]) for r in table["rows"]}
        if lens == {3}:
            branches = np.array([r["eigenvalues"] for r in table["rows"]])
            series = {f"eigenvalue {k}": branches[:, k] for k in range(3)}
        else:
            series = {"eigengap": [r["eigengap"] for r in table["rows"]]}
        figures = [("spectrum", lambda path: report.save_series(
            path, ns, series, "n", "eigenvalues of N = H K",
            "Structure operator spectrum along the family"))]
        checks = []
        if args.do_assert:
            tol = args.tol if args.tol is not None else 1e-10
            row_verdicts = {r["verdict"] for r in table["rows"]}
            limit_verdict = table["limit"]["verdict"]
            jump = limit_verdict not in row_verdicts
            checks.append(("verdict jumps at the limit", jump,
                           f"rows {sorted(row_verdicts)}, limit {limit_verdict}"))
            agree = True
            detail = []
            for k in sorted({2, 10, min(100, nmax), nmax}):
                if k < 2 or k > nmax:
                    continue
                member = psl2r.sequence_metric(alpha, gamma, delta, k)
                fl = psl2r.classify(member, lane="float").verdict if _definite(member) else None
                ex = (psl2r.classify(member, lane="exact").verdict
                      if member.exact is not None and _definite(member) else None)
                if fl is not None and ex is not None and fl != ex:
                    agree = False
                detail.append(f"n={k}:{'skip' if fl is None else fl.value}")
            checks.append(("exact and float lanes agree on a subsample", agree,
                           " ".join(detail)))
            if limit_verdict == psl2r.IsometryVerdict.LEFT_ONLY.value:
                limit_metric = psl2r.sequence_metric(alpha, gamma, delta, None)
                plane = psl2r.common_lightlike_plane(limit_metric, tol=tol)
                ok = plane is not None
                det_text = "no degenerate plane"
                if ok:
                    worst = max(plane.metric_residual, plane.killing_residual)
                    ok = worst <= tol
                    det_text = f"restricted Gram residual {worst:.3g}"
                checks.append(("limit carries a common lightlike plane", ok,
                               det_text))
        return {"text": text, "ext": "json", "figures": figures, "checks": checks}

    matrix_text = cfg.pop("matrix", None)
    lane = cfg.pop("lane", "float")
    _reject_unknown(cfg)
    if matrix_text is None:
        metric = psl2r.LeftInvariantMetric(psl2r.killing_matrix(),
                                           exact=psl2r.killing_matrix_exact())
    else:
        metric = psl2r.parse_metric_text(matrix_text)
    rep = psl2r.classify(metric, lane=lane)
    payload = rep.to_dict()
    if rep.verdict is psl2r.IsometryVerdict.LEFT_ONLY:
        plane = psl2r.common_lightlike_plane(metric)
        if plane is not None:
            payload["lightlike_plane"] = {
                "normal": plane.normal,
                "basis": plane.basis,
                "eigenvalue": psl2r._json_number(plane.eigenvalue),
                "metric_residual": plane.metric_residual,
                "killing_residual": plane.killing_residual,
            }
    text = _json_text(payload)
    eigs = [complex(v) for v in rep.eigenvalues]
    figures = [("spectrum", lambda path: report.save_scatter(
        path, [v.real for v in eigs], [v.imag for v in eigs],
        "Re", "Im", "Eigenvalues of the structure operator"))]
    checks = []
    if args.do_assert:
        op = psl2r.structure_operator(metric)
        scale = max(1.0, float(np.max(np.abs(op.matrix))))
        res = op.selfadjoint_residual
        checks.append(("structure operator is self-adjoint for the pairing",
                       res <= 1e-12 * scale, f"residual {res:.3g}"))
        checks.append(("verdict is definite",
                       rep.verdict is not psl2r.IsometryVerdict.UNCLASSIFIED,
                       rep.verdict.value))
    return {"text": text, "ext": "json", "figures": figures, "checks": checks}


def _definite(metric):
    try:
        return psl2r._sylvester_signature(metric.matrix) == (2, 1)
    except psl2r.SignatureError:
        return False


def _cmd_reduce_forms(args, cfg):
    count = _int_value(cfg.pop("count", "1000"), "count")
    scale = _float_value(cfg.pop("scale", "1e-2"), "scale")
    _reject_unknown(cfg)
    if count < 1:
        raise PreconditionError("count must be positive")
    if not (0 < scale <= 0.1):
        raise PreconditionError("scale must lie in (0, 0.1]")
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(seed)
    lines = ["index,dim,delta,residual,m_offset,ratio"]
    deltas = []
    offsets = []
    worst_res = 0.0
    worst_ratio = 0.0
    for idx in range(count):
        dim = 2 if idx % 2 == 0 else 3
        J = np.diag([1.0] * (dim - 1) + [-1.0])
        R = np.eye(dim) + 0.25 * rng.uniform(-1.0, 1.0, (dim, dim))
        H = R.T @ J @ R
        D = rng.uniform(-1.0, 1.0, (dim, dim))
        D = 0.5 * (D + D.T)
        D *= scale * rng.uniform(0.1, 1.0) / np.linalg.norm(D)
        Hn = H + D
        M = approx.reduce_to_base(H, Hn)
        residual = float(np.max(np.abs(M.T @ H @ M - Hn)))
        delta = float(np.linalg.norm(D))
        offset = float(np.linalg.norm(M - np.eye(dim)))
        ratio = offset / delta
        worst_res = max(worst_res, residual)
        worst_ratio = max(worst_ratio, ratio)
        deltas.append(delta)
        offsets.append(offset)
        lines.append(",".join([str(idx), str(dim)] + [
            _fmt(v) for v in (delta, residual, offset, ratio)]))
    text = "\n".join(lines) + "\n"
    figures = [("offsets", lambda path: report.save_scatter(
        path, deltas, offsets, "||H_n - H||_F", "||M - Id||_F",
        "Reduction offset against perturbation size",
        logx=True, logy=True))]
    checks = []
    if args.do_assert:
        tol = args.tol if args.tol is not None else 1e-12
        checks.append(("congruence residual below tolerance",
                       worst_res <= tol, f"worst residual {worst_res:.3g}"))
        checks.append(("reduction stays 5-Lipschitz in the perturbation",
                       worst_ratio <= 5.0, f"worst ratio {worst_ratio:.3g}"))
    return {"text": text, "ext": "csv", "figures": figures, "checks": checks}


_COMMANDS = {
    "curvature-map": (_cmd_curvature_map,
                      "sample the Gauss curvature of a metric on a grid (CSV)"),
    "lightlike-fields": (_cmd_lightlike_fields,
                         "angles of both lightlike direction fields (CSV)"),
    "gauss-bonnet": (_cmd_gauss_bonnet,
                     "curvature integral against boundary holonomy on a "
                     "lightlike annulus (JSON)"),
    "flatness-scan": (_cmd_flatness_scan,
                      "foliation constancy deviations for random torus "
                      "metrics (CSV)"),
    "anosov-rates": (_cmd_anosov_rates,
                     "C^k decay table of hyperbolic pullbacks (CSV)"),
    "as-field": (_cmd_as_field,
                 "approximately stable direction field of the cat map (CSV)"),
    "moduli-orbit": (_cmd_moduli_orbit,
                     "congruence orbit probe and equidistribution statistics "
                     "(JSON)"),
    "classify-psl2r": (_cmd_classify_psl2r,
                       "isometry-group verdict for a left-invariant metric "
                       "(JSON)"),
    "reduce-forms": (_cmd_reduce_forms,
                     "base-point reduction residuals for perturbed forms (CSV)"),
}


def build_parser():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--grid", type=int, default=None, metavar="N",
                        help="grid resolution per axis")
    parent.add_argument("--nmax", type=int, default=None, metavar="N",
                        help="iteration depth, word radius, or family range")
    parent.add_argument("--budget", type=int, default=None, metavar="N",
                        help="sample budget for statistical commands")
    parent.add_argument("--seed", type=int, default=None, metavar="N",
                        help="seed for every random draw")
    parent.add_argument("--tol", type=float, default=None, metavar="X",
                        help="tolerance override for --assert checks")
    parent.add_argument("--eps", type=float, default=None, metavar="X",
                        help="perturbation size where one applies")
    parent.add_argument("--assert", dest="do_assert", action="store_true",
                        help="run the command's checks; exit 3 on failure")
    parent.add_argument("--out", default=None, metavar="PATH",
                        help="write the artifact here instead of stdout")
    parent.add_argument("--no-plot", dest="no_plot", action="store_true",
                        help="skip figure rendering next to --out")
    parent.add_argument("--config", default=None, metavar="FILE",
                        help="key=value file, may include other files")
    parent.add_argument("settings", nargs="*", metavar="KEY=VALUE",
                        help="configuration overrides")
    parser = argparse.ArgumentParser(
        prog="lorentzlab",
        description="Numerical experiments on Lorentzian surfaces and "
                    "left-invariant 3D metrics.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in _COMMANDS.items():
        sub.add_parser(name, parents=[parent], help=help_text)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.settings, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    handler = _COMMANDS[args.command][0]
    try:
        result = handler(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ExpressionError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except LorentzLabError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 2

    if args.do_assert:
        for label, ok, detail in result["checks"]:
            tag = "ok" if ok else "FAIL"
            print(f"assert {tag}: {label} ({detail})", file=sys.stderr)

    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(result["text"])
            print(f"wrote {args.out}", file=sys.stderr)
            if not args.no_plot:
                stem = os.path.splitext(args.out)[0]
                for suffix, draw in result["figures"]:
                    path = f"{stem}_{suffix}.png"
                    draw(path)
                    print(f"wrote {path}", file=sys.stderr)
        else:
            sys.stdout.write(result["text"])
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 2

    if args.do_assert and any(not ok for _, ok, _ in result["checks"]):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
