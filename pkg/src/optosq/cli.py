"""Command-line front end: simulate / sweep / derive with CSV + JSON outputs."""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import linearized, reduced
from .config import (
    TWO_PI,
    ConfigError,
    ScenarioConfig,
    default_config_path,
    load_scenario,
)
from .integrator import StiffnessError, default_timestep
from .linearized import Trajectory
from .model import (
    DivergenceError,
    DriveSpec,
    MeanFieldState,
    dimensionless_temperature_from_nbar,
    nbar_from_dimensionless_temperature,
    periodic_orbit_mean_field,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_INVARIANT = 4

CSV_COLUMNS = (
    "t_s,re_a,im_a,re_b,im_b,"
    "V11,V12,V13,V14,V22,V23,V24,V33,V34,V44,"
    "var_pi4,var_opt,theta_opt"
)

#: a run counts as squeezed only when the minimum variance sits at least
#: this far (relative) below the 1/2 vacuum limit, so threshold-margin noise
#: does not flip the flag
SQUEEZED_MARGIN = 0.02

#: fraction of the run (by time) averaged into the steady-band variance
STEADY_BAND_FRACTION = 0.25


def _fmt(x: float) -> str:
    # shortest round-trip decimal
    return repr(float(x))


def resolve_init_mean(cfg: ScenarioConfig) -> MeanFieldState:
    if cfg.init_mean_mode == "rest":
        return MeanFieldState.rest()
    if cfg.init_mean_mode == "periodic_orbit":
        return periodic_orbit_mean_field(cfg.params, cfg.drive)
    return cfg.init_mean


def _trajectory_from_reduced(red: reduced.ReducedTrajectory, cfg: ScenarioConfig) -> Trajectory:
    """Present a rotating-frame reduced run in the lab-frame trajectory layout.

    The cavity block is the adiabatic picture: mean field from the closed
    form, fluctuations at vacuum.  The mirror block is the rotating-frame
    covariance rotated back to the lab.
    """
    n = len(red.t)
    wmod = cfg.drive.modulation_freq
    v = np.zeros((n, 4, 4))
    a_mean = np.empty(n, dtype=complex)
    var_pi4 = np.empty(n)
    var_opt = np.empty(n)
    theta_opt = np.empty(n)
    for k in range(n):
        t = red.t[k]
        v[k, :2, :2] = 0.5 * np.eye(2)
        v[k, 2:, 2:] = reduced.lab_frame_mirror_block(red.v[k], wmod * t)
        a_mean[k] = reduced.adiabatic_cavity_amplitude(t, cfg.params, cfg.drive)
        var_pi4[k] = linearized.quadrature_variance(
            v[k], linearized.rotating_pi4_angle(t, cfg.drive)
        )
        theta_opt[k], var_opt[k] = linearized.optimal_squeezing_angle(v[k])
    return Trajectory(
        t=red.t.copy(),
        a_mean=a_mean,
        b_mean=np.zeros(n, dtype=complex),
        v=v,
        var_pi4=var_pi4,
        var_opt=var_opt,
        theta_opt=theta_opt,
        sym_drift=np.zeros(n),
        v_scale=np.abs(v).max(axis=(1, 2)),
        var_rwa=red.var_pi4.copy(),
    )


def run_scenario(cfg: ScenarioConfig) -> Trajectory:
    """Run the configured model(s) and return the trajectory.

    For model "both" the reduced rotating-frame variance is co-evaluated at
    the full model's record times and attached as `var_rwa`.
    """
    rp = reduced.ReducedParams.from_system(cfg.params, cfg.drive)
    if cfg.model == "rwa":
        red = reduced.rwa_covariance_propagate(rp, cfg.t_final, control=cfg.control)
        return _trajectory_from_reduced(red, cfg)

    traj = linearized.propagate(
        cfg.params,
        cfg.drive,
        cfg.t_final,
        control=cfg.control,
        init_mean=resolve_init_mean(cfg),
        init_cov=cfg.init_cov,
    )
    if cfg.model == "both":
        red = reduced.rwa_covariance_propagate(
            rp, cfg.t_final, control=cfg.control, t_eval=traj.t
        )
        traj.var_rwa = red.var_pi4
    return traj


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    header = CSV_COLUMNS + (",var_rwa" if traj.var_rwa is not None else "")
    upper = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for k in range(len(traj.t)):
            row = [
                _fmt(traj.t[k]),
                _fmt(traj.a_mean[k].real),
                _fmt(traj.a_mean[k].imag),
                _fmt(traj.b_mean[k].real),
                _fmt(traj.b_mean[k].imag),
            ]
            vk = traj.v[k]
            row.extend(_fmt(vk[i, j]) for i, j in upper)
            row.extend([_fmt(traj.var_pi4[k]), _fmt(traj.var_opt[k]), _fmt(traj.theta_opt[k])])
            if traj.var_rwa is not None:
                row.append(_fmt(traj.var_rwa[k]))
            fh.write(",".join(row) + "\n")


def build_summary(traj: Trajectory, cfg: ScenarioConfig) -> dict:
    k_opt = int(np.argmin(traj.var_opt))
    k_pi4 = int(np.argmin(traj.var_pi4))
    band = traj.t >= (1.0 - STEADY_BAND_FRACTION) * traj.t[-1]
    min_var_opt = float(traj.var_opt[k_opt])
    summary = {
        "model": cfg.model,
        "t_final_s": cfg.t_final,
        "records": int(len(traj.t)),
        "steps_taken": int(traj.steps_taken),
        "min_var_opt": min_var_opt,
        "t_at_min_var_opt": float(traj.t[k_opt]),
        "theta_at_min_var_opt": float(traj.theta_opt[k_opt]),
        "min_var_pi4": float(traj.var_pi4[k_pi4]),
        "t_at_min_var_pi4": float(traj.t[k_pi4]),
        "squeezing_db": linearized.squeezing_db(min_var_opt),
        "squeezed": bool(min_var_opt < 0.5 * (1.0 - SQUEEZED_MARGIN)),
        "steady_band_var_opt": float(traj.var_opt[band].mean()),
        "steady_band_var_pi4": float(traj.var_pi4[band].mean()),
        "invariants": traj.invariant_report(),
        "derived": {
            "xi0_rad_s": cfg.drive.xi0,
            "modulation_freq_rad_s": cfg.drive.modulation_freq,
            "nbar_m": cfg.params.nbar_m,
        },
    }
    if traj.var_rwa is not None:
        with np.errstate(divide="ignore"):
            gap_opt = np.abs(traj.var_opt - traj.var_rwa) / traj.var_rwa
            gap_pi4 = np.abs(traj.var_pi4 - traj.var_rwa) / traj.var_rwa
        summary["max_rel_gap_var_opt_vs_rwa"] = float(np.max(gap_opt))
        summary["max_rel_gap_var_pi4_vs_rwa"] = float(np.max(gap_pi4))
    return summary


def _write_summary(path: Path, summary: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(cfg: ScenarioConfig, outdir: Path) -> int:
    """Run one scenario; write trajectory.csv and summary.json into outdir."""
    outdir.mkdir(parents=True, exist_ok=True)
    traj = run_scenario(cfg)
    summary = build_summary(traj, cfg)
    write_trajectory_csv(outdir / "trajectory.csv", traj)
    _write_summary(outdir / "summary.json", summary)
    if not summary["invariants"]["all_ok"]:
        return EXIT_INVARIANT
    return EXIT_OK


def apply_sweep_value(cfg: ScenarioConfig, value: float) -> ScenarioConfig:
    """Specialize the scenario to one sweep point (sweep block dropped)."""
    variable = cfg.sweep.variable
    if variable == "temperature_dimensionless":
        params = cfg.params.with_nbar(nbar_from_dimensionless_temperature(value))
        drive = cfg.drive
    elif variable == "nbar":
        params = cfg.params.with_nbar(value)
        drive = cfg.drive
    else:  # omega0, given in Hz like drive.omega0_hz
        params = cfg.params
        drive = DriveSpec.for_system(params, TWO_PI * value)
    return replace(cfg, params=params, drive=drive, sweep=None)


def _sweep_worker(args) -> dict:
    cfg, value, point_dir = args
    point_cfg = apply_sweep_value(cfg, value)
    point_dir = Path(point_dir)
    result = {"value": value, "status": "ok", "exit_code": EXIT_OK}
    try:
        code = cmd_simulate(point_cfg, point_dir)
        summary = json.loads((point_dir / "summary.json").read_text())
        result.update(
            exit_code=code,
            status="ok" if code == EXIT_OK else "invariant_violation",
            min_var_opt=summary["min_var_opt"],
            steady_band_var_opt=summary["steady_band_var_opt"],
            squeezed=summary["squeezed"],
        )
    except (DivergenceError, StiffnessError) as exc:
        point_dir.mkdir(parents=True, exist_ok=True)
        (point_dir / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        result.update(status="divergence", exit_code=EXIT_DIVERGENCE)
    return result


def _sweep_workers_limit(n_points: int) -> int:
    env = os.environ.get("OPTOSQ_THREADS")
    cap = os.cpu_count() or 1
    if env is not None:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"OPTOSQ_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(n_points, cap))


def cmd_sweep(cfg: ScenarioConfig, outdir: Path) -> int:
    """Run every sweep point (concurrently) and merge sweep_summary.csv."""
    if cfg.sweep is None:
        raise ConfigError("sweep command needs a sweep block in the config")
    outdir.mkdir(parents=True, exist_ok=True)
    values = cfg.sweep.values
    width = max(2, len(str(len(values) - 1)))
    jobs = [
        (cfg, value, str(outdir / f"point_{i:0{width}d}"))
        for i, value in enumerate(values)
    ]
    workers = _sweep_workers_limit(len(values))
    if workers == 1:
        results = [_sweep_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))

    with open(outdir / "sweep_summary.csv", "w", newline="\n") as fh:
        fh.write("value,min_var_opt,steady_band_var_opt,squeezed,status\n")
        for res in results:
            if res["status"] == "ok" or res["status"] == "invariant_violation":
                fh.write(
                    f"{_fmt(res['value'])},{_fmt(res['min_var_opt'])},"
                    f"{_fmt(res['steady_band_var_opt'])},"
                    f"{str(res['squeezed']).lower()},{res['status']}\n"
                )
            else:
                fh.write(f"{_fmt(res['value'])},,,,{res['status']}\n")

    codes = [res["exit_code"] for res in results]
    if EXIT_DIVERGENCE in codes:
        return EXIT_DIVERGENCE
    if EXIT_INVARIANT in codes:
        return EXIT_INVARIANT
    return EXIT_OK


def _mean_field_prerun_max_gxb(cfg: ScenarioConfig, n_periods: float = 3.0) -> float:
    """Integrate the mean field alone and track max |g <X_b>| for regime checks."""
    params, drive = cfg.params, cfg.drive
    wmod = drive.modulation_freq
    horizon = n_periods * TWO_PI / (abs(wmod) if wmod != 0.0 else params.omega_m)
    dt = default_timestep(max(params.delta_c, params.omega_m))
    n = max(1, round(horizon / dt))
    h = horizon / n
    gc2, gm2 = 0.5 * params.gamma_c, 0.5 * params.gamma_m
    om, g, dc, omega0 = params.omega_m, params.g, params.delta_c, drive.omega0

    def rhs(t, y):
        ra, ia, rb, ib = y
        delta = dc - 2.0 * g * rb
        return np.array(
            [
                delta * ia - gc2 * ra,
                -delta * ra - gc2 * ia - omega0 * math.sin(wmod * t),
                om * ib - gm2 * rb,
                -om * rb - gm2 * ib + g * (ra * ra + ia * ia),
            ]
        )

    from .integrator import step

    y = np.zeros(4)
    max_gxb = 0.0
    for i in range(n):
        y = step(y, i * h, h, rhs)
        max_gxb = max(max_gxb, abs(g * math.sqrt(2.0) * y[2]))
    return max_gxb


def cmd_derive(cfg: ScenarioConfig, stream=None) -> dict:
    """Print and return the derived quantities and regime flags."""
    stream = stream if stream is not None else sys.stdout
    params, drive = cfg.params, cfg.drive
    rp = reduced.ReducedParams.from_system(params, drive)
    report = {
        "xi0_rad_s": drive.xi0,
        "xi0_hz": drive.xi0 / TWO_PI,
        "eta_rad_s": rp.eta,
        "modulation_freq_hz": drive.modulation_freq / TWO_PI,
        "nbar_m": params.nbar_m,
        "temperature_dimensionless": dimensionless_temperature_from_nbar(params.nbar_m),
        "cavity_noise_bound": reduced.cavity_noise_bound(params, rp),
        "thermal_floor": rp.gamma_m * (rp.nbar_m + 0.5) / (rp.gamma_m + rp.xi0),
    }
    nbar_c = reduced.critical_nbar(rp)
    report["critical_nbar"] = nbar_c
    if nbar_c > 0.0:
        tc = reduced.critical_temperature(nbar_c, params.omega_m)
        report["critical_temperature_dimensionless"] = tc.dimensionless
        report["critical_temperature_kelvin"] = tc.kelvin
        report["squeezing_possible"] = True
    else:
        report["critical_temperature_dimensionless"] = 0.0
        report["critical_temperature_kelvin"] = 0.0
        report["squeezing_possible"] = False

    max_gxb = _mean_field_prerun_max_gxb(cfg)
    regime = {
        "delta_c_over_omega_m": params.delta_c / params.omega_m,
        "large_detuning_ok": params.is_large_detuning(),
        "omega_m_over_xi0": (params.omega_m / drive.xi0) if drive.xi0 > 0 else math.inf,
        "xi0_well_below_omega_m": drive.xi0 < 0.2 * params.omega_m,
        "max_g_xb_rad_s": max_gxb,
        "delta_c_over_max_g_xb": (params.delta_c / max_gxb) if max_gxb > 0 else math.inf,
        "detuning_dominates_g_xb": params.delta_c >= 5.0 * max_gxb,
    }
    report["regime"] = regime

    print(f"xi0                     = {report['xi0_rad_s']:.6e} rad/s = 2*pi * {report['xi0_hz']:.4f} Hz", file=stream)
    print(f"eta                     = {report['eta_rad_s']:.6e} rad/s", file=stream)
    print(f"critical nbar           = {nbar_c:.4f}", file=stream)
    print(f"k_B T_c / (hbar omega_m)= {report['critical_temperature_dimensionless']:.4f}", file=stream)
    print(
        f"T_c                     = {report['critical_temperature_kelvin']:.4e} K "
        "(rescaled dimensionless ratio; the ratio is the primary figure)",
        file=stream,
    )
    print(f"cavity-noise bound      = {report['cavity_noise_bound']:.4e}", file=stream)
    print(f"thermal floor           = {report['thermal_floor']:.4e}", file=stream)
    if not report["squeezing_possible"]:
        print("flag: no squeezing possible (xi0 = 0)", file=stream)
    print(f"regime: delta_c/omega_m = {regime['delta_c_over_omega_m']:.3f} "
          f"(large-detuning {'ok' if regime['large_detuning_ok'] else 'VIOLATED'})", file=stream)
    if not regime["large_detuning_ok"]:
        print("warning: large-detuning condition delta_c >= 5*omega_m not met; "
              "adiabatic estimates are unreliable", file=stream)
    print(f"regime: omega_m/xi0     = {regime['omega_m_over_xi0']:.3f}", file=stream)
    print(f"regime: max g<X_b>      = {regime['max_g_xb_rad_s']:.4e} rad/s, "
          f"delta_c/g<X_b> = {regime['delta_c_over_max_g_xb']:.3f} "
          f"({'ok' if regime['detuning_dominates_g_xb'] else 'VIOLATED'})", file=stream)
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="optosq",
        description="Modulated-drive optomechanical squeezing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_out in (("simulate", True), ("sweep", True), ("derive", False)):
        p = sub.add_parser(name)
        p.add_argument(
            "--config",
            default=None,
            help="scenario JSON (defaults to the bundled reference scenario)",
        )
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    config_path = args.config if args.config is not None else default_config_path()
    try:
        cfg = load_scenario(config_path)
        if args.command == "simulate":
            return cmd_simulate(cfg, Path(args.out))
        if args.command == "sweep":
            return cmd_sweep(cfg, Path(args.out))
        cmd_derive(cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, StiffnessError) as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
