#!/usr/bin/env python3
"""Render the mirror-variance figure from simulator CSV outputs.

Reads the documented trajectory schema (`t_s,...,var_pi4,var_opt,theta_opt`)
from a sweep directory (sweep_summary.csv + point_*/trajectory.csv) or from a
single run directory, draws one variance-vs-time curve per temperature with
the 1/2 vacuum line dashed, and writes a PNG.

Decimation keeps the per-bucket minimum and maximum rows, so the fast
oscillation envelope survives thinning and the plotted minimum of each curve
equals the full-resolution minimum exactly.

Usage: plot_fig2.py --sweep <dir> --out fig2.png [--column var_pi4] [--stride N]
"""

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

VALID_COLUMNS = ("var_pi4", "var_opt")


class PlotInputError(RuntimeError):
    """The sweep directory or CSV contents do not match the expected schema."""


def load_trajectory(csv_path: Path, column: str):
    """Read (t_s, column) from a trajectory CSV; fail with a clear message."""
    if not csv_path.is_file():
        raise PlotInputError(f"missing trajectory file: {csv_path}")
    times = []
    values = []
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "t_s" not in header or column not in header:
            raise PlotInputError(
                f"{csv_path} lacks required column(s) 't_s'/'{column}'; "
                f"found: {', '.join(header)}"
            )
        for row in reader:
            times.append(float(row["t_s"]))
            values.append(float(row[column]))
    if not times:
        raise PlotInputError(f"{csv_path} holds no data rows")
    return times, values


def decimate_minmax(times, values, stride: int):
    """Thin to ~2 rows per stride bucket, keeping each bucket's min and max."""
    if stride <= 1:
        return list(times), list(values)
    out_t = []
    out_v = []
    for start in range(0, len(times), stride):
        bucket_t = times[start : start + stride]
        bucket_v = values[start : start + stride]
        lo = min(range(len(bucket_v)), key=bucket_v.__getitem__)
        hi = max(range(len(bucket_v)), key=bucket_v.__getitem__)
        for k in sorted({lo, hi}):
            out_t.append(bucket_t[k])
            out_v.append(bucket_v[k])
    return out_t, out_v


@dataclass
class Curve:
    label: str | None
    times: list
    values: list


def discover_curves(sweep_dir: Path, column: str, stride: int):
    """Collect curves from a sweep directory, or a single run directory."""
    sweep_dir = Path(sweep_dir)
    if not sweep_dir.is_dir():
        raise PlotInputError(f"not a directory: {sweep_dir}")

    summary_csv = sweep_dir / "sweep_summary.csv"
    curves = []
    if summary_csv.is_file():
        with open(summary_csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
        point_dirs = sorted(p for p in sweep_dir.iterdir() if p.is_dir())
        if len(point_dirs) != len(rows):
            raise PlotInputError(
                f"{summary_csv} lists {len(rows)} points but "
                f"{len(point_dirs)} point directories exist"
            )
        for row, point in zip(rows, point_dirs):
            if row.get("status") not in (None, "", "ok", "invariant_violation"):
                continue  # failed point: no trajectory to draw
            t, v = load_trajectory(point / "trajectory.csv", column)
            t, v = decimate_minmax(t, v, stride)
            curves.append(Curve(label=f"k_B T_m / (hbar omega_m) = {row['value']}", times=t, values=v))
    elif (sweep_dir / "trajectory.csv").is_file():
        t, v = load_trajectory(sweep_dir / "trajectory.csv", column)
        t, v = decimate_minmax(t, v, stride)
        curves.append(Curve(label=None, times=t, values=v))
    else:
        raise PlotInputError(
            f"{sweep_dir} holds neither sweep_summary.csv nor trajectory.csv"
        )
    if not curves:
        raise PlotInputError(f"no plottable curves found under {sweep_dir}")
    return curves


def render(curves, column: str):
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for curve in curves:
        t_us = [1e6 * t for t in curve.times]
        ax.plot(t_us, curve.values, linewidth=1.2, label=curve.label)
    ax.axhline(0.5, color="black", linestyle="--", linewidth=1.0, label=None)
    ax.set_xlabel("time (us)")
    ylabel = {
        "var_pi4": "rotating pi/4 quadrature variance",
        "var_opt": "minimal quadrature variance",
    }[column]
    ax.set_ylabel(ylabel)
    if any(c.label for c in curves):
        ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    return fig, ax


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Plot mirror quadrature variance curves from sweep CSV output"
    )
    parser.add_argument("--sweep", required=True, help="sweep or single-run directory")
    parser.add_argument("--out", required=True, help="output image path (PNG)")
    parser.add_argument("--column", default="var_opt", choices=VALID_COLUMNS)
    parser.add_argument(
        "--stride",
        type=int,
        default=1,
        help="decimation bucket size (per-bucket min/max rows are kept)",
    )
    args = parser.parse_args(argv)
    try:
        curves = discover_curves(Path(args.sweep), args.column, args.stride)
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fig, _ = render(curves, args.column)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    print(f"wrote {out} ({len(curves)} curve(s), column {args.column})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
