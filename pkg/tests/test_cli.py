"""End-to-end checks of the command line driver.

Each test invokes ``main`` in process with an argv list, so exit codes,
stdout artifacts, and the files written next to ``--out`` are all
observable without spawning a subprocess.
"""

import json

import numpy as np
import pytest

from lorentzlab import cli
from lorentzlab import report


def run(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_curvature_map_stdout(capsys):
    code, out, err = run(["curvature-map", "--grid", "8"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("x\\y,")
    assert len(lines) == 9


def test_curvature_map_assert_fails_honestly(capsys):
    code, out, err = run(["curvature-map", "--grid", "16", "--assert",
                          "--no-plot"], capsys)
    assert code == 3
    assert "FAIL" in err


def test_out_writes_artifact_and_figures(tmp_path, capsys):
    out_path = tmp_path / "curv.csv"
    code, out, err = run(["curvature-map", "--grid", "8",
                          "--out", str(out_path)], capsys)
    assert code == 0
    assert out_path.exists()
    pngs = sorted(p.name for p in tmp_path.glob("*.png"))
    assert pngs == ["curv_K.png"]
    assert "wrote" in err


def test_no_plot_suppresses_figures(tmp_path, capsys):
    out_path = tmp_path / "curv.csv"
    code, _, _ = run(["curvature-map", "--grid", "8", "--out", str(out_path),
                      "--no-plot"], capsys)
    assert code == 0
    assert list(tmp_path.glob("*.png")) == []


def test_artifacts_are_deterministic(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path in (a, b):
        code, _, _ = run(["flatness-scan", "count=1", "seeds=2", "--grid", "32",
                          "--seed", "5", "--out", str(path), "--no-plot"],
                         capsys)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_bad_expression_reports_position(capsys):
    code, out, err = run(["curvature-map", "E=2*x*)y"], capsys)
    assert code == 1
    assert "line 1" in err and "column" in err


def test_bad_setting_is_config_error(capsys):
    code, _, err = run(["curvature-map", "grid"], capsys)
    assert code == 1
    assert "error" in err


def test_unknown_key_is_precondition(capsys):
    code, _, err = run(["curvature-map", "gird=8"], capsys)
    assert code == 2
    assert "unknown config key" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["curvature-map", "--config",
                        str(tmp_path / "nope.cfg")], capsys)
    assert code == 1


def test_config_file_and_include(tmp_path, capsys):
    base = tmp_path / "base.cfg"
    base.write_text("E=2*x*y^2\nF=1/3\n")
    top = tmp_path / "top.cfg"
    top.write_text(f"include={base}\nF=1/2\n")
    code, out, _ = run(["curvature-map", "--grid", "8", "--config", str(top)],
                       capsys)
    assert code == 0
    assert len(out.strip().splitlines()) == 9


def test_config_include_cycle(tmp_path, capsys):
    cfg = tmp_path / "self.cfg"
    cfg.write_text(f"include={cfg}\n")
    code, _, err = run(["curvature-map", "--config", str(cfg)], capsys)
    assert code == 1


def test_riemannian_metric_rejected(capsys):
    code, _, err = run(["curvature-map", "E=1", "F=0", "G=1"], capsys)
    assert code == 2


def test_gauss_bonnet_json(tmp_path, capsys):
    out_path = tmp_path / "gb.json"
    code, _, _ = run(["gauss-bonnet", "--out", str(out_path), "--no-plot",
                      "--assert"], capsys)
    assert code == 0
    blob = json.loads(out_path.read_text())
    assert abs(blob["curvature_integral"] - 1.0) < 1e-3
    assert abs(blob["difference"]) < 1e-6
    assert abs(blob["lambda_left"] - np.exp(0.5)) < 1e-6


def test_lightlike_fields_csv(capsys):
    code, out, _ = run(["lightlike-fields", "--grid", "12", "--assert",
                        "--no-plot"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x,y,angle0,angle1"
    assert len(lines) == 1 + 13 * 13


def test_moduli_orbit_rational_branch(tmp_path, capsys):
    out_path = tmp_path / "orbit.json"
    code, _, _ = run(["moduli-orbit", "slope1=0", "slope2=inf",
                      "--budget", "20000", "--nmax", "4", "--assert",
                      "--out", str(out_path), "--no-plot"], capsys)
    assert code == 0
    blob = json.loads(out_path.read_text())
    assert blob["slopes_rational"] == [True, True]
    assert blob["probe"][-1]["min_displacement"] >= 1.0


def test_moduli_budget_gate(capsys):
    code, _, err = run(["moduli-orbit", "--budget", "100"], capsys)
    assert code == 2


def test_classify_default_is_biinvariant(capsys):
    code, out, _ = run(["classify-psl2r"], capsys)
    assert code == 0
    blob = json.loads(out)
    assert blob["verdict"] == "Biinvariant"


def test_classify_family_mode(tmp_path, capsys):
    out_path = tmp_path / "fam.json"
    code, _, _ = run(["classify-psl2r", "alpha=1", "gamma=1", "delta=1",
                      "--nmax", "12", "--assert", "--out", str(out_path),
                      "--no-plot"], capsys)
    assert code == 0
    blob = json.loads(out_path.read_text())
    assert blob["limit"]["verdict"] == "LeftOnly"
    assert all(r["verdict"] == "FullTimesZ2" for r in blob["rows"])


def test_reduce_forms_csv(tmp_path, capsys):
    out_path = tmp_path / "forms.csv"
    code, _, _ = run(["reduce-forms", "count=40", "--assert",
                      "--out", str(out_path), "--no-plot"], capsys)
    assert code == 0
    lines = out_path.read_text().strip().splitlines()
    assert lines[0] == "index,dim,delta,residual,m_offset,ratio"
    assert len(lines) == 41


def test_anosov_rates_runs(capsys):
    code, out, _ = run(["anosov-rates", "--nmax", "4", "--grid", "64", "--assert",
                        "--no-plot"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,c0,c1,c2,ratio0,ratio1"
    assert len(lines) == 6


def test_as_field_runs(capsys):
    code, out, _ = run(["as-field", "--grid", "8", "--nmax", "8", "--assert",
                        "--no-plot"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "x,y,angle"


def test_report_helpers_write_png(tmp_path):
    p1 = tmp_path / "h.png"
    report.save_heatmap(p1, np.random.default_rng(0).uniform(size=(8, 8)),
                        (0, 1, 0, 1), "t", "v")
    p2 = tmp_path / "s.png"
    report.save_series(p2, [1, 2, 3], {"a": [1.0, 0.5, 0.25]}, "x", "y", "t",
                       logy=True)
    p3 = tmp_path / "sc.png"
    report.save_scatter(p3, [1.0, 2.0], [3.0, 4.0], "x", "y", "t")
    p4 = tmp_path / "o.png"
    report.save_occupancy(p4, np.arange(64).reshape(8, 8), "t")
    for p in (p1, p2, p3, p4):
        assert p.exists() and p.stat().st_size > 0
