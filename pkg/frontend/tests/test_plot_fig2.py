import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from plot_fig2 import (  # noqa: E402
    PlotInputError,
    decimate_minmax,
    discover_curves,
    load_trajectory,
    main,
    render,
)

HEADER = (
    "t_s,re_a,im_a,re_b,im_b,V11,V12,V13,V14,V22,V23,V24,V33,V34,V44,"
    "var_pi4,var_opt,theta_opt"
)


def synthetic_rows(n=400, floor=0.01, rate=4e4, wiggle=0.1, phase=0.0):
    """Decaying-to-floor variance with a fast oscillation on top."""
    rows = []
    for k in range(n):
        t = k * 4e-7
        envelope = floor + (0.5 - floor) * math.exp(-rate * t)
        var_opt = envelope * (1 + wiggle * math.sin(1.3e7 * t + phase) ** 2)
        var_pi4 = var_opt * (1 + 0.05 * math.cos(2.6e7 * t))
        rows.append((t, var_pi4, var_opt))
    return rows


def write_point(point_dir: Path, rows):
    point_dir.mkdir(parents=True, exist_ok=True)
    lines = [HEADER]
    for t, var_pi4, var_opt in rows:
        cells = [repr(t)] + ["0.0"] * 14 + [repr(var_pi4), repr(var_opt), "0.0"]
        lines.append(",".join(cells))
    (point_dir / "trajectory.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "min_var_opt": min(r[2] for r in rows),
        "min_var_pi4": min(r[1] for r in rows),
    }
    (point_dir / "summary.json").write_text(json.dumps(summary))
    return summary


def make_sweep(tmp_path: Path, values=(0.0, 20.0, 50.0)):
    sweep = tmp_path / "sweep"
    sweep.mkdir()
    lines = ["value,min_var_opt,steady_band_var_opt,squeezed,status"]
    for i, value in enumerate(values):
        rows = synthetic_rows(floor=0.01 + 0.16 * value / 50.0, phase=0.7 * i)
        write_point(sweep / f"point_{i:02d}", rows)
        lines.append(f"{value!r},0.0,0.0,false,ok")
    (sweep / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    return sweep


class TestDecimation:
    def test_stride_one_is_identity(self):
        rows = synthetic_rows(50)
        t = [r[0] for r in rows]
        v = [r[2] for r in rows]
        td, vd = decimate_minmax(t, v, 1)
        assert td == t and vd == v

    def test_preserves_bucket_extrema(self):
        rows = synthetic_rows(1000)
        t = [r[0] for r in rows]
        v = [r[2] for r in rows]
        td, vd = decimate_minmax(t, v, 100)
        assert len(vd) <= 2 * math.ceil(len(v) / 100)
        assert min(vd) == min(v)
        assert max(vd) == max(v)
        # every bucket's extrema survive
        for start in range(0, len(v), 100):
            bucket = v[start : start + 100]
            assert min(bucket) in vd
            assert max(bucket) in vd

    def test_times_stay_sorted(self):
        rows = synthetic_rows(500)
        td, _ = decimate_minmax([r[0] for r in rows], [r[2] for r in rows], 64)
        assert td == sorted(td)


class TestDiscoverAndRender:
    def test_three_curve_sweep(self, tmp_path):
        sweep = make_sweep(tmp_path)
        curves = discover_curves(sweep, "var_opt", stride=1)
        assert len(curves) == 3
        assert all(c.label for c in curves)
        fig, ax = render(curves, "var_opt")
        lines = ax.get_lines()
        assert len(lines) == 4  # three curves + the 1/2 reference
        dashed = [l for l in lines if l.get_linestyle() == "--"]
        assert len(dashed) == 1
        assert set(dashed[0].get_ydata()) == {0.5}
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        assert any("50.0" in l for l in labels)

    def test_plotted_minima_match_summary(self, tmp_path):
        sweep = make_sweep(tmp_path)
        for column in ("var_opt", "var_pi4"):
            for stride in (1, 100):
                curves = discover_curves(sweep, column, stride=stride)
                for i, curve in enumerate(curves):
                    summary = json.loads(
                        (sweep / f"point_{i:02d}" / "summary.json").read_text()
                    )
                    assert min(curve.values) == pytest.approx(
                        summary[f"min_{column}"], rel=1e-9, abs=0
                    )

    def test_single_run_input(self, tmp_path):
        run_dir = tmp_path / "single"
        write_point(run_dir, synthetic_rows(200))
        curves = discover_curves(run_dir, "var_opt", stride=1)
        assert len(curves) == 1 and curves[0].label is None
        fig, ax = render(curves, "var_opt")
        assert ax.get_legend() is None

    def test_missing_column_is_descriptive(self, tmp_path):
        run_dir = tmp_path / "bad"
        run_dir.mkdir()
        (run_dir / "trajectory.csv").write_text("t_s,other\n0.0,1.0\n")
        with pytest.raises(PlotInputError, match="var_opt"):
            load_trajectory(run_dir / "trajectory.csv", "var_opt")

    def test_missing_inputs_are_descriptive(self, tmp_path):
        with pytest.raises(PlotInputError, match="neither"):
            discover_curves(tmp_path, "var_opt", 1)
        with pytest.raises(PlotInputError, match="missing trajectory"):
            load_trajectory(tmp_path / "nope.csv", "var_opt")


class TestCommandLine:
    def test_main_writes_png(self, tmp_path, capsys):
        sweep = make_sweep(tmp_path)
        out = tmp_path / "fig" / "fig2.png"
        assert main(["--sweep", str(sweep), "--out", str(out), "--stride", "50"]) == 0
        assert out.is_file() and out.stat().st_size > 5000
        assert "3 curve(s)" in capsys.readouterr().out

    def test_main_reports_bad_input(self, tmp_path, capsys):
        assert main(["--sweep", str(tmp_path), "--out", str(tmp_path / "x.png")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_rejects_unknown_column(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["--sweep", str(tmp_path), "--out", "x.png", "--column", "V33"])


@pytest.fixture(scope="module")
def real_sweep(tmp_path_factory):
    config = {
        "system": {
            "omega_m_hz": 1.0e6,
            "delta_c_hz": 1.0e7,
            "g_hz": 100.0,
            "gamma_c_hz": 1.0e5,
            "gamma_m_hz": 100.0,
            "temperature_dimensionless": 0.0,
        },
        "drive": {"omega0_hz": 3.16e10},
        "init": {"mean_field": "periodic_orbit", "covariance": "ground"},
        "run": {
            "t_final_s": 2.0e-6,
            "model": "full",
            "integration": {"mode": "fixed", "dt_s": 2.0e-9, "output_stride": 100},
        },
        "sweep": {"variable": "temperature_dimensionless", "values": [0.0, 50.0]},
    }
    base = tmp_path_factory.mktemp("real")
    cfg_path = base / "scenario.json"
    cfg_path.write_text(json.dumps(config))
    out = base / "sweep"
    proc = subprocess.run(
        [sys.executable, "-m", "optosq", "sweep", "--config", str(cfg_path), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out


class TestAgainstRealSimulatorOutput:
    """End-to-end through the primary's public CLI surface only."""

    def test_plot_from_simulator_sweep(self, real_sweep, tmp_path):
        out = tmp_path / "fig2.png"
        assert main(["--sweep", str(real_sweep), "--out", str(out)]) == 0
        assert out.is_file()
        curves = discover_curves(real_sweep, "var_opt", stride=1)
        for i, curve in enumerate(curves):
            summary = json.loads(
                (real_sweep / f"point_{i:02d}" / "summary.json").read_text()
            )
            assert min(curve.values) == pytest.approx(
                summary["min_var_opt"], rel=1e-9, abs=0
            )
