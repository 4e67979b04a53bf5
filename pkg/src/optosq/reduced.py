"""Analytic reduced models: adiabatic cavity elimination, the resonant
parametric oscillator in the rotating frame, thermal-noise estimates, and
critical-threshold formulas.  These serve as fast estimators and as oracles
for the full linearized propagation.
"""

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import HBAR, K_B
from .integrator import IntegrationControl, step
from .model import DomainError, DriveSpec, SystemParams, drive_amplitude


class RegimeWarning(UserWarning):
    """An approximation was evaluated outside its validity regime."""


@dataclass(frozen=True)
class ReducedParams:
    """Rates of the effective rotating-frame parametric oscillator.

    eta = 2 g^2 delta_c / (delta_c^2 + gamma_c^2/4) is the coefficient
    turning |<a(t)>|^2 into the instantaneous mirror frequency shift; xi0 is
    its drive-cycle average, which doubles as the parametric gain rate.
    """

    xi0: float
    gamma_m: float
    nbar_m: float
    eta: float

    @classmethod
    def from_system(cls, params: SystemParams, drive: DriveSpec) -> "ReducedParams":
        eta = 2.0 * params.g**2 * params.delta_c / (params.delta_c**2 + params.gamma_c**2 / 4.0)
        return cls(xi0=drive.xi0, gamma_m=params.gamma_m, nbar_m=params.nbar_m, eta=eta)


def adiabatic_cavity_amplitude(t: float, params: SystemParams, drive: DriveSpec) -> complex:
    """Adiabatically eliminated cavity amplitude -Omega(t)/(delta_c - i gamma_c/2).

    Valid in the large-detuning regime; outside it a RegimeWarning is issued.
    """
    if not params.is_large_detuning():
        warnings.warn(
            "adiabatic cavity amplitude evaluated outside the large-detuning regime "
            f"(delta_c/omega_m = {params.delta_c / params.omega_m:.2f})",
            RegimeWarning,
            stacklevel=2,
        )
    return -drive_amplitude(t, drive) / (params.delta_c - 0.5j * params.gamma_c)


def rwa_variance_undamped(t: float, xi0: float) -> float:
    """Damping-free squeezed variance (1/2) e^{-xi0 t} of the pi/4 quadrature."""
    return 0.5 * math.exp(-xi0 * t)


def thermal_estimate_variance(t: float, rp: ReducedParams) -> float:
    """Mirror-bath-only estimate of the squeezed-quadrature variance.

    (1/2) e^{-(gamma_m+xi0) t}
      + gamma_m (nbar + 1/2) / (gamma_m + xi0) * (1 - e^{-(gamma_m+xi0) t})
    """
    rate = rp.gamma_m + rp.xi0
    decay = math.exp(-rate * t)
    floor = rp.gamma_m * (rp.nbar_m + 0.5) / rate
    return 0.5 * decay + floor * (1.0 - decay)


def critical_nbar(rp: ReducedParams) -> float:
    """Bath occupation above which squeezing disappears: xi0 / (2 gamma_m)."""
    if not rp.gamma_m > 0.0:
        raise DomainError("gamma_m must be positive")
    return rp.xi0 / (2.0 * rp.gamma_m)


class CriticalTemperature(NamedTuple):
    kelvin: float
    dimensionless: float


def critical_temperature(nbar_c: float, omega_m: float) -> CriticalTemperature:
    """Bath temperature matching a critical occupation via Bose-Einstein inversion.

    Returns the temperature in kelvin and the dimensionless k_B T_c/(hbar omega_m)
    = 1/ln(1 + 1/nbar_c).  The dimensionless value is the primary figure; the
    kelvin value simply rescales it by hbar omega_m / k_B.
    """
    if not nbar_c > 0.0:
        raise DomainError("nbar_c must be positive")
    log_term = math.log1p(1.0 / nbar_c)
    return CriticalTemperature(
        kelvin=HBAR * omega_m / (K_B * log_term), dimensionless=1.0 / log_term
    )


def cavity_noise_bound(params: SystemParams, rp: ReducedParams) -> float:
    """Order-of-magnitude long-time cavity-noise contribution to the variance.

    xi0 (gamma_m + xi0 + gamma_c) / [4 delta_c (gamma_m + xi0)].  An estimate,
    not an exact floor; it is small against the thermal floor at large detuning.
    """
    rate = rp.gamma_m + rp.xi0
    return rp.xi0 * (rate + params.gamma_c) / (4.0 * params.delta_c * rate)


def lab_frame_mirror_block(v2: np.ndarray, phi: float) -> np.ndarray:
    """Map a rotating-frame 2x2 mirror covariance to the lab frame.

    The rotating-frame theta quadrature is the lab quadrature at theta - phi,
    so V_lab = Rot(phi)^T V_rot Rot(phi).
    """
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s], [s, c]])
    return rot.T @ v2 @ rot


@dataclass
class ReducedTrajectory:
    """Rotating-frame second moments of the effective parametric oscillator."""

    t: np.ndarray
    v: np.ndarray  # (n, 2, 2) rotating-frame mirror covariance
    var_pi4: np.ndarray
    var_min: np.ndarray
    var_max: np.ndarray


def rwa_covariance_propagate(
    rp: ReducedParams,
    t_final: float,
    control: IntegrationControl | None = None,
    t_eval=None,
    include_cavity_noise: bool = False,
    cavity_bound: float = 0.0,
) -> ReducedTrajectory:
    """Integrate the closed 2x2 rotating-frame moment system.

    The drift [[-gamma_m/2, -xi0/2], [-xi0/2, -gamma_m/2]] squeezes the pi/4
    quadrature at rate gamma_m + xi0 and amplifies the -pi/4 quadrature;
    with only the mirror bath the pi/4 variance reproduces the closed-form
    thermal estimate.  `include_cavity_noise` adds the order-of-magnitude
    cavity floor as extra isotropic diffusion cavity_bound*(gamma_m+xi0),
    so the long-time pi/4 variance gains `cavity_bound` (an estimate).

    t_eval, when given, pins the record times exactly (the step subdivides to
    land on each); otherwise records follow control.output_stride.
    """
    if not t_final > 0.0:
        raise ValueError("t_final must be positive")
    if control is None:
        control = IntegrationControl(output_stride=10)
    rate = rp.gamma_m + rp.xi0
    dt = control.dt if control.dt is not None else 0.002 / max(rate, rp.xi0, 1e-300)
    diffusion = rp.gamma_m * (2.0 * rp.nbar_m + 1.0) / 2.0
    if include_cavity_noise:
        diffusion += cavity_bound * rate
    gm, xi, c = rp.gamma_m, rp.xi0, diffusion

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        v11, v12, v22 = y
        return np.array(
            [
                -gm * v11 - xi * v12 + c,
                -gm * v12 - 0.5 * xi * (v11 + v22),
                -gm * v22 - xi * v12 + c,
            ]
        )

    y = np.array([0.5, 0.0, 0.5])
    rec_t, rec_v = [], []

    def record(t, yv):
        rec_t.append(t)
        rec_v.append(np.array([[yv[0], yv[1]], [yv[1], yv[2]]]))

    if t_eval is not None:
        targets = np.atleast_1d(np.asarray(t_eval, dtype=float))
        if np.any(np.diff(targets) <= 0) or targets[0] < 0:
            raise ValueError("t_eval must be strictly increasing and nonnegative")
        t = 0.0
        for t_target in targets:
            if t_target > t:
                n = max(1, round((t_target - t) / dt))
                h = (t_target - t) / n
                for k in range(n):
                    y = step(y, t + k * h, h, rhs)
                t = t_target
            record(t, y)
    else:
        n = max(1, round(t_final / dt))
        h = t_final / n
        record(0.0, y)
        for i in range(n):
            y = step(y, i * h, h, rhs)
            if (i + 1) % control.output_stride == 0 or i + 1 == n:
                record((i + 1) * h, y)

    t_arr = np.array(rec_t)
    v_arr = np.array(rec_v)
    mean = 0.5 * (v_arr[:, 0, 0] + v_arr[:, 1, 1])
    half_span = 0.5 * np.hypot(
        v_arr[:, 1, 1] - v_arr[:, 0, 0], 2.0 * v_arr[:, 0, 1]
    )
    return ReducedTrajectory(
        t=t_arr,
        v=v_arr,
        var_pi4=mean + v_arr[:, 0, 1],
        var_min=mean - half_span,
        var_max=mean + half_span,
    )
