"""Linearized fluctuation dynamics: drift/noise matrices, joint covariance
propagation, formal fundamental-matrix cross-check, and squeezing metrics.

The fluctuation vector is v = (dX_a, dY_a, dX_b, dY_b).  The production path
propagates the real symmetrized covariance V (V_ll' = Re<v_l v_l'>) through
the differential Lyapunov equation dV/dt = M V + V M^T + C_sym jointly with
the classical mean field that parameterizes M(t).  The formal solution
through the fundamental matrix G(t) is kept as a short-horizon cross-check:
G^-1 grows like e^{+gamma t/2} for this damped system, which makes the
noise integral numerically explosive on long horizons.
"""

import math
from dataclasses import dataclass

import numpy as np

from .integrator import (
    IntegrationControl,
    IntegrationError,
    adaptive_step,
    default_timestep,
    project_symmetric,
    step,
)
from .model import (
    SQRT2,
    DivergenceError,
    DriveSpec,
    MeanFieldState,
    SystemParams,
    mean_quadratures,
)

#: symplectic form of the two-mode quadrature vector ([X_a,Y_a]=[X_b,Y_b]=i)
SYMPLECTIC_FORM = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)


class ConditioningError(IntegrationError):
    """The fundamental matrix became too ill-conditioned to invert reliably."""


class CovarianceError(ValueError):
    """An input covariance matrix violates its structural invariants."""


def build_drift_matrix(state: MeanFieldState, params: SystemParams) -> np.ndarray:
    """Time-dependent drift matrix M(t) of the linearized quadrature system.

    The cavity rows use the shifted detuning Delta(t) = delta_c - 2 g Re<b>,
    the coupling entries use the mean quadratures <X_a> = sqrt(2) Re<a> and
    <Y_a> = sqrt(2) Im<a>.
    """
    xa, ya = mean_quadratures(state.a_mean)
    delta = params.delta_c - 2.0 * params.g * state.b_mean.real
    sg = SQRT2 * params.g
    return np.array(
        [
            [-0.5 * params.gamma_c, delta, -sg * ya, 0.0],
            [-delta, -0.5 * params.gamma_c, sg * xa, 0.0],
            [0.0, 0.0, -0.5 * params.gamma_m, params.omega_m],
            [sg * xa, sg * ya, -params.omega_m, -0.5 * params.gamma_m],
        ]
    )


@dataclass(frozen=True)
class NoiseMatrices:
    """Markovian input-noise correlation matrix in both forms.

    c_complex is the ordered two-time correlation coefficient (the baths are
    delta-correlated); c_sym = (C + C^T)/2 is its real symmetrized part used
    by the Lyapunov propagation.
    """

    c_complex: np.ndarray
    c_sym: np.ndarray


def noise_matrix(params: SystemParams) -> NoiseMatrices:
    """Noise matrix for a vacuum cavity bath and a thermal mirror bath."""
    gc, gm, nm = params.gamma_c, params.gamma_m, params.nbar_m
    c_complex = 0.5 * np.array(
        [
            [gc, 1j * gc, 0.0, 0.0],
            [-1j * gc, gc, 0.0, 0.0],
            [0.0, 0.0, gm * (2 * nm + 1), 1j * gm],
            [0.0, 0.0, -1j * gm, gm * (2 * nm + 1)],
        ],
        dtype=complex,
    )
    c_sym = 0.5 * (c_complex + c_complex.T).real.copy()
    return NoiseMatrices(c_complex=c_complex, c_sym=c_sym)


def covariance_rhs(v: np.ndarray, m: np.ndarray, noise: NoiseMatrices) -> np.ndarray:
    """Lyapunov right-hand side M V + V M^T + C_sym for symmetric V."""
    mv = m @ v
    return mv + mv.T + noise.c_sym


def ground_state_covariance() -> np.ndarray:
    """Symmetrized covariance of the two-mode ground state: V = I/2."""
    return 0.5 * np.eye(4)


def ground_state_ordered() -> np.ndarray:
    """Ordered second moments R of the ground state (+-i/2 off-diagonals)."""
    return ground_state_covariance() + 0.5j * SYMPLECTIC_FORM


def validate_covariance(v: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Check symmetry and the block uncertainty floors; return V as float array."""
    v = np.asarray(v, dtype=float)
    if v.shape != (4, 4):
        raise CovarianceError("covariance must be a 4x4 matrix")
    if not np.array_equal(v, v.T):
        raise CovarianceError("covariance must be exactly symmetric")
    limit = 0.25 * (1.0 - tol)
    det_c = v[0, 0] * v[1, 1] - v[0, 1] ** 2
    det_m = v[2, 2] * v[3, 3] - v[2, 3] ** 2
    if det_c < limit or det_m < limit:
        raise CovarianceError(
            f"uncertainty violation: block determinants {det_c:.3e}, {det_m:.3e} < 1/4"
        )
    return v


def quadrature_variance(v: np.ndarray, theta: float) -> float:
    """Variance of the mirror quadrature rotated by theta in the lab frame.

    cos^2(theta) V33 + sin^2(theta) V44 + sin(2 theta) V34.
    """
    c, s = math.cos(theta), math.sin(theta)
    return c * c * v[2, 2] + s * s * v[3, 3] + 2.0 * s * c * v[2, 3]


def optimal_squeezing_angle(v: np.ndarray) -> tuple[float, float]:
    """Angle in [0, pi) minimizing the mirror quadrature variance, and the minimum.

    Analytically the smaller eigenvalue of the mirror 2x2 block and its
    eigenvector angle; the isotropic case ties-breaks to theta = 0.
    """
    v33, v34, v44 = v[2, 2], v[2, 3], v[3, 3]
    half_span = 0.5 * math.hypot(v44 - v33, 2.0 * v34)
    theta = 0.5 * math.atan2(-2.0 * v34, v44 - v33) % math.pi
    return theta, 0.5 * (v33 + v44) - half_span


def squeezing_db(var: float) -> float:
    """Squeezing in dB relative to the 1/2 vacuum limit; positive = squeezed."""
    if not var > 0.0:
        raise ValueError("variance must be positive")
    return -10.0 * math.log10(2.0 * var)


def rotating_pi4_angle(t: float, drive: DriveSpec) -> float:
    """Lab-frame angle of the rotating-frame pi/4 quadrature at time t.

    The rotating frame of the parametric process is delta_B = delta_b *
    exp(i (omega_m - xi0) t); its theta quadrature maps to the lab-frame
    quadrature at theta - (omega_m - xi0) t.
    """
    return 0.25 * math.pi - drive.modulation_freq * t


@dataclass
class Trajectory:
    """Time-stamped propagation records.

    v holds the full symmetric 4x4 covariance per record; sym_drift is the
    largest pre-projection asymmetry max|V - V^T| observed since the previous
    record, and v_scale the matching max|V| for relative normalization.
    var_rwa is attached by callers that co-propagate the reduced model.
    """

    t: np.ndarray
    a_mean: np.ndarray
    b_mean: np.ndarray
    v: np.ndarray
    var_pi4: np.ndarray
    var_opt: np.ndarray
    theta_opt: np.ndarray
    sym_drift: np.ndarray
    v_scale: np.ndarray
    var_rwa: np.ndarray | None = None
    steps_taken: int = 0

    def uncertainty_products(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-record block determinants (cavity, mirror)."""
        v = self.v
        det_c = v[:, 0, 0] * v[:, 1, 1] - v[:, 0, 1] ** 2
        det_m = v[:, 2, 2] * v[:, 3, 3] - v[:, 2, 3] ** 2
        return det_c, det_m

    def invariant_report(
        self, uncertainty_tol: float = 1e-6, symmetry_tol: float = 1e-12
    ) -> dict:
        """Check the per-record structural invariants of the propagation."""
        det_c, det_m = self.uncertainty_products()
        limit = 0.25 * (1.0 - uncertainty_tol)
        scale = np.maximum(self.v_scale, 1e-300)
        rel_drift = float(np.max(self.sym_drift / scale))
        report = {
            "uncertainty_ok": bool(det_c.min() >= limit and det_m.min() >= limit),
            "min_uncertainty_cavity": float(det_c.min()),
            "min_uncertainty_mirror": float(det_m.min()),
            "symmetry_ok": bool(rel_drift < symmetry_tol),
            "max_rel_symmetry_drift": rel_drift,
        }
        report["all_ok"] = report["uncertainty_ok"] and report["symmetry_ok"]
        return report


def _make_full_rhs(params: SystemParams, drive: DriveSpec, c_sym: np.ndarray):
    """Flat-state RHS for the joint mean-field + covariance system.

    Layout: y = [Re<a>, Im<a>, Re<b>, Im<b>, V.ravel()] (20 floats).  The
    matrix block repeats `build_drift_matrix`/`covariance_rhs`, inlined on the
    flat state for speed; equivalence is pinned by tests.
    """
    gc2 = 0.5 * params.gamma_c
    gm2 = 0.5 * params.gamma_m
    om = params.omega_m
    g = params.g
    dc = params.delta_c
    sg = SQRT2 * g
    omega0 = drive.omega0
    wmod = drive.modulation_freq
    sin = math.sin

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        ra, ia, rb, ib = y[0], y[1], y[2], y[3]
        delta = dc - 2.0 * g * rb
        om_t = omega0 * sin(wmod * t)
        out = np.empty(20)
        out[0] = delta * ia - gc2 * ra
        out[1] = -delta * ra - gc2 * ia - om_t
        out[2] = om * ib - gm2 * rb
        out[3] = -om * rb - gm2 * ib + g * (ra * ra + ia * ia)
        xa = SQRT2 * ra
        ya = SQRT2 * ia
        m = np.array(
            [
                [-gc2, delta, -sg * ya, 0.0],
                [-delta, -gc2, sg * xa, 0.0],
                [0.0, 0.0, -gm2, om],
                [sg * xa, sg * ya, -om, -gm2],
            ]
        )
        mv = m @ y[4:20].reshape(4, 4)
        out[4:] = (mv + mv.T + c_sym).ravel()
        return out

    return rhs


def _resolve_control(params: SystemParams, control: IntegrationControl | None):
    """Fill in the default fixed step from the fastest scale (delta_c)."""
    if control is None:
        control = IntegrationControl()
    if control.dt is None:
        dt = default_timestep(max(params.delta_c, params.omega_m))
    else:
        dt = control.dt
    return control, dt


def propagate(
    params: SystemParams,
    drive: DriveSpec,
    t_final: float,
    control: IntegrationControl | None = None,
    init_mean: MeanFieldState | None = None,
    init_cov: np.ndarray | None = None,
) -> Trajectory:
    """Jointly integrate the mean field and the covariance to t_final.

    Records are emitted at t=0, every `output_stride` accepted steps, at local
    minima of the theta-optimal variance (so the slow squeezing envelope is
    captured between stride points), and at t_final.  The covariance is
    symmetrized after every step; the pre-projection asymmetry is tracked and
    reported per record.

    Raises DivergenceError on non-finite states and StiffnessError on
    adaptive step underflow; uncertainty/PSD quality is monitored, not
    enforced (see Trajectory.invariant_report).
    """
    if not t_final > 0.0:
        raise ValueError("t_final must be positive")
    control, dt = _resolve_control(params, control)
    mean0 = init_mean if init_mean is not None else MeanFieldState.rest()
    cov0 = (
        ground_state_covariance()
        if init_cov is None
        else validate_covariance(init_cov)
    )
    noise = noise_matrix(params)
    rhs = _make_full_rhs(params, drive, noise.c_sym)

    y = np.empty(20)
    y[0], y[1] = mean0.a_mean.real, mean0.a_mean.imag
    y[2], y[3] = mean0.b_mean.real, mean0.b_mean.imag
    y[4:] = cov0.ravel()

    rec_t: list[float] = []
    rec_a: list[complex] = []
    rec_b: list[complex] = []
    rec_v: list[np.ndarray] = []
    rec_pi4: list[float] = []
    rec_opt: list[float] = []
    rec_th: list[float] = []
    rec_drift: list[float] = []
    rec_scale: list[float] = []

    drift_since_record = 0.0

    def var_opt_of(yv: np.ndarray) -> float:
        v33, v34, v44 = yv[14], yv[15], yv[19]
        return 0.5 * (v33 + v44) - 0.5 * math.hypot(v44 - v33, 2.0 * v34)

    def record(t: float, yv: np.ndarray):
        nonlocal drift_since_record
        v = yv[4:].reshape(4, 4).copy()
        theta, var_min = optimal_squeezing_angle(v)
        rec_t.append(t)
        rec_a.append(complex(yv[0], yv[1]))
        rec_b.append(complex(yv[2], yv[3]))
        rec_v.append(v)
        rec_pi4.append(quadrature_variance(v, rotating_pi4_angle(t, drive)))
        rec_opt.append(var_min)
        rec_th.append(theta)
        rec_drift.append(drift_since_record)
        rec_scale.append(float(np.max(np.abs(v))))
        drift_since_record = 0.0

    record(0.0, y)

    if control.mode == "fixed":
        n_steps = max(1, round(t_final / dt))
        if n_steps > control.max_steps:
            raise IntegrationError(
                f"fixed-step plan needs {n_steps} steps > max_steps={control.max_steps}"
            )
        dt_eff = t_final / n_steps
        stepper = "fixed"
    else:
        n_steps = None
        dt_eff = dt
        stepper = "adaptive"
    dt_cap = t_final / (2.0 * control.output_stride)

    t = 0.0
    i = 0
    last_recorded_step = 0
    # 3-point window for local-minimum detection on the optimal variance
    prev_vopt = var_opt_of(y)
    prev_prev_vopt = math.inf
    prev_y = y.copy()
    prev_t = 0.0
    prev_step_index = 0

    while True:
        if stepper == "fixed":
            if i >= n_steps:
                break
            y_new = step(y, t, dt_eff, rhs)
            t_new = (i + 1) * dt_eff if i + 1 < n_steps else t_final
        else:
            if t >= t_final:
                break
            if i >= control.max_steps:
                raise IntegrationError(f"exceeded max_steps={control.max_steps}")
            dt_try = min(dt_eff, t_final - t)
            y_new, dt_used, dt_eff, _ = adaptive_step(
                y, t, dt_try, control, rhs, dt_max=dt_cap
            )
            t_new = t + dt_used

        vmat = y_new[4:].reshape(4, 4)
        sym, asym = project_symmetric(vmat)
        y_new[4:] = sym.ravel()
        drift_since_record = max(drift_since_record, asym)

        i += 1
        cur_vopt = var_opt_of(y_new)
        # emit the previous step if it was a strict local minimum of var_opt
        if (
            prev_vopt < prev_prev_vopt
            and prev_vopt < cur_vopt
            and prev_step_index != last_recorded_step
        ):
            record(prev_t, prev_y)
            last_recorded_step = prev_step_index

        at_end = (stepper == "fixed" and i == n_steps) or (
            stepper == "adaptive" and t_new >= t_final
        )
        if i % control.output_stride == 0 or at_end:
            record(t_new, y_new)
            last_recorded_step = i

        prev_prev_vopt = prev_vopt
        prev_vopt = cur_vopt
        prev_y = y_new
        prev_t = t_new
        prev_step_index = i
        y = y_new
        t = t_new

    return Trajectory(
        t=np.array(rec_t),
        a_mean=np.array(rec_a),
        b_mean=np.array(rec_b),
        v=np.array(rec_v),
        var_pi4=np.array(rec_pi4),
        var_opt=np.array(rec_opt),
        theta_opt=np.array(rec_th),
        sym_drift=np.array(rec_drift),
        v_scale=np.array(rec_scale),
        steps_taken=i,
    )


@dataclass
class FundamentalCheckResult:
    """Outcome of the formal-solution cross-check against the Lyapunov path."""

    t_grid: np.ndarray
    deviations: np.ndarray
    max_deviation: float
    cond_max: float
    tolerance_estimate: float | None
    v_lyap: np.ndarray | None = None
    v_formal: np.ndarray | None = None


def fundamental_matrix_check(
    params: SystemParams,
    drive: DriveSpec,
    t_grid,
    control: IntegrationControl | None = None,
    init_mean: MeanFieldState | None = None,
    init_cov: np.ndarray | None = None,
    cond_limit: float = 1e6,
    estimate_tolerance: bool = True,
) -> FundamentalCheckResult:
    """Propagate the covariance along both formal routes and compare.

    Route 1 is the Lyapunov differential form.  Route 2 integrates the
    fundamental matrix dG/dt = M(t) G with G(0) = I together with the noise
    integral Z(t) = int_0^t G^-1 C_sym (G^-1)^T dtau (the delta-correlated
    bath collapses the double integral), then forms V = G (V0 + Z) G^T at
    each grid time.  Both routes share one mean-field solution and one step
    grid, so the returned deviation isolates the method difference.

    The optional tolerance estimate is a Richardson extrapolation of the
    Lyapunov route's own global error (one extra run at dt/2).  Fixed-step
    mode only.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be strictly increasing and nonnegative")
    control, dt = _resolve_control(params, control)
    if control.mode != "fixed":
        raise ValueError("fundamental_matrix_check supports fixed-step mode only")

    mean0 = init_mean if init_mean is not None else MeanFieldState.rest()
    cov0 = (
        ground_state_covariance()
        if init_cov is None
        else validate_covariance(init_cov)
    )
    noise = noise_matrix(params)
    c_sym = noise.c_sym
    base_rhs = _make_full_rhs(params, drive, c_sym)
    eye4 = np.eye(4)

    def joint_rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = np.empty(52)
        out[:20] = base_rhs(t, y[:20])
        # reconstruct M(t) from the mean-field block
        state = MeanFieldState(complex(y[0], y[1]), complex(y[2], y[3]))
        m = build_drift_matrix(state, params)
        gmat = y[20:36].reshape(4, 4)
        out[20:36] = (m @ gmat).ravel()
        ginv = np.linalg.solve(gmat, eye4)
        out[36:52] = (ginv @ c_sym @ ginv.T).ravel()
        return out

    def run(dt_run: float):
        y = np.zeros(52)
        y[0], y[1] = mean0.a_mean.real, mean0.a_mean.imag
        y[2], y[3] = mean0.b_mean.real, mean0.b_mean.imag
        y[4:20] = cov0.ravel()
        y[20:36] = eye4.ravel()
        t = 0.0
        devs = []
        v_lyap_grid = []
        v_formal_grid = []
        cond_max = 1.0
        for t_target in t_grid:
            if t_target > t:
                n = max(1, round((t_target - t) / dt_run))
                h = (t_target - t) / n
                for k in range(n):
                    y = step(y, t + k * h, h, joint_rhs)
                    vmat, _ = project_symmetric(y[4:20].reshape(4, 4))
                    y[4:20] = vmat.ravel()
                t = t_target
            gmat = y[20:36].reshape(4, 4)
            cond = float(np.linalg.cond(gmat))
            cond_max = max(cond_max, cond)
            if cond > cond_limit:
                raise ConditioningError(
                    f"cond(G)={cond:.3e} exceeds {cond_limit:.1e} at t={t:.3e}"
                )
            z = y[36:52].reshape(4, 4)
            v_formal = gmat @ (cov0 + 0.5 * (z + z.T)) @ gmat.T
            v_lyap = y[4:20].reshape(4, 4)
            devs.append(float(np.max(np.abs(v_formal - v_lyap))))
            v_lyap_grid.append(v_lyap.copy())
            v_formal_grid.append(v_formal)
        return np.array(devs), cond_max, np.array(v_lyap_grid), np.array(v_formal_grid)

    devs, cond_max, v_lyap, v_formal = run(dt)
    tol_est = None
    if estimate_tolerance:
        # Richardson at dt/2 for BOTH routes: the formal route's noise integral
        # carries the exponentially growing G^-1 and dominates the truncation
        # error, so the combined estimate must cover it, not just the Lyapunov
        # route; err(dt) ~ |X_dt - X_dt/2| * 16/15 for a 4th-order method.
        _, _, v_lyap_h, v_formal_h = run(0.5 * dt)
        est_lyap = float(np.max(np.abs(v_lyap - v_lyap_h)))
        est_formal = float(np.max(np.abs(v_formal - v_formal_h)))
        tol_est = max(est_lyap, est_formal) * 16.0 / 15.0
    return FundamentalCheckResult(
        t_grid=t_grid,
        deviations=devs,
        max_deviation=float(devs.max()),
        cond_max=cond_max,
        tolerance_estimate=tol_est,
        v_lyap=v_lyap,
        v_formal=v_formal,
    )


def ordered_cross_check(
    params: SystemParams,
    drive: DriveSpec,
    t_final: float,
    control: IntegrationControl | None = None,
    init_mean: MeanFieldState | None = None,
) -> dict:
    """Propagate the complex ordered moments R alongside the real V.

    Returns the worst entrywise deviation of (R - R^T) from i*J (the constant
    commutator content) and of Re(R) from the independently propagated V,
    checked every `output_stride` steps.
    """
    control, dt = _resolve_control(params, control)
    if control.mode != "fixed":
        raise ValueError("ordered_cross_check supports fixed-step mode only")
    mean0 = init_mean if init_mean is not None else MeanFieldState.rest()
    noise = noise_matrix(params)
    base_rhs = _make_full_rhs(params, drive, noise.c_sym)
    c_complex = noise.c_complex

    def joint_rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = np.empty(52)
        out[:20] = base_rhs(t, y[:20])
        state = MeanFieldState(complex(y[0], y[1]), complex(y[2], y[3]))
        m = build_drift_matrix(state, params)
        r = y[20:36].reshape(4, 4) + 1j * y[36:52].reshape(4, 4)
        dr = m @ r + r @ m.T + c_complex
        out[20:36] = dr.real.ravel()
        out[36:52] = dr.imag.ravel()
        return out

    r0 = ground_state_ordered()
    y = np.zeros(52)
    y[0], y[1] = mean0.a_mean.real, mean0.a_mean.imag
    y[2], y[3] = mean0.b_mean.real, mean0.b_mean.imag
    y[4:20] = ground_state_covariance().ravel()
    y[20:36] = r0.real.ravel()
    y[36:52] = r0.imag.ravel()

    n_steps = max(1, round(t_final / dt))
    h = t_final / n_steps
    comm_target = SYMPLECTIC_FORM
    worst_comm = 0.0
    worst_real = 0.0
    for i in range(n_steps):
        y = step(y, i * h, h, joint_rhs)
        vmat, _ = project_symmetric(y[4:20].reshape(4, 4))
        y[4:20] = vmat.ravel()
        if (i + 1) % control.output_stride == 0 or i + 1 == n_steps:
            r = y[20:36].reshape(4, 4) + 1j * y[36:52].reshape(4, 4)
            comm = (r - r.T) / 1j
            worst_comm = max(worst_comm, float(np.max(np.abs(comm - comm_target))))
            worst_real = max(
                worst_real, float(np.max(np.abs(r.real - y[4:20].reshape(4, 4))))
            )
    return {"commutator_deviation": worst_comm, "real_part_deviation": worst_real}
