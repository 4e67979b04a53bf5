"""Shared numerical stepping engine: fixed-step RK4 and embedded adaptive RK5(4).

States are flat float64 arrays; right-hand sides are callables rhs(t, y) -> dy/dt.
The stepping functions are stateless, so any number of integrations can run
concurrently.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import DivergenceError

#: hard floor for the adaptive step size (s); going below raises StiffnessError
DT_MIN = 1e-15


class IntegrationError(RuntimeError):
    pass


class StiffnessError(IntegrationError):
    """Adaptive step size underflowed DT_MIN."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class IntegrationControl:
    """Stepping policy shared by all propagations.

    mode "fixed" takes classical RK4 steps of size `dt` (when None, the caller
    derives a default from the fastest system frequency).  mode "adaptive"
    uses an embedded Dormand-Prince 5(4) pair with per-component error scale
    abs_tol + rel_tol*|y|.  Records are emitted every `output_stride` accepted
    steps.
    """

    mode: str = "fixed"
    dt: float | None = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_steps: int = 20_000_000
    output_stride: int = 400

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown integration mode {self.mode!r}")
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0 or self.output_stride <= 0:
            raise ValueError("max_steps and output_stride must be positive")


def default_timestep(omega_fastest: float, points_per_period: int = 50) -> float:
    """Fixed step resolving the fastest angular frequency with >= n points/period."""
    return 2.0 * math.pi / omega_fastest / points_per_period


def step(y: np.ndarray, t: float, dt: float, rhs) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        raise DivergenceError("non-finite state after RK4 step", t_last_good=t)
    return out


# Dormand-Prince 5(4) tableau; row 7 doubles as the 5th-order weights (FSAL).
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def adaptive_step(y: np.ndarray, t: float, dt: float, control: IntegrationControl, rhs,
                  dt_max: float | None = None):
    """One accepted embedded RK5(4) step with error control.

    Retries with smaller dt until the per-component error estimate is below
    abs_tol + rel_tol*|y|.  Returns (y_new, dt_used, dt_next, n_rejected).
    """
    n_rejected = 0
    while True:
        if dt < DT_MIN:
            raise StiffnessError(f"adaptive step size underflow at t={t:.3e}", t)
        k = [rhs(t, y)]
        for i in range(1, 7):
            yi = y + dt * sum(aij * kj for aij, kj in zip(_DP_A[i], k))
            k.append(rhs(t + _DP_C[i] * dt, yi))
        y5 = y + dt * sum(aij * kj for aij, kj in zip(_DP_A[6], k))
        # recompute stage 7 at y5 (FSAL structure): k[6] is rhs(t+dt, y5) already
        y4 = y + dt * sum(bj * kj for bj, kj in zip(_DP_B4, k))
        if not np.isfinite(y5).all():
            raise DivergenceError("non-finite state in adaptive step", t_last_good=t)
        scale = control.abs_tol + control.rel_tol * np.abs(y)
        err = float(np.max(np.abs(y5 - y4) / scale))
        if err <= 1.0:
            grow = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** (-0.2))
            dt_next = dt * max(0.2, grow)
            if dt_max is not None:
                dt_next = min(dt_next, dt_max)
            return y5, dt, dt_next, n_rejected
        dt = dt * max(0.2, 0.9 * err ** (-0.2))
        n_rejected += 1


def project_symmetric(v: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetrize a square matrix; also report the pre-projection asymmetry.

    Returns ((V + V^T)/2, max|V - V^T|).
    """
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("project_symmetric expects a square matrix")
    asym = float(np.max(np.abs(v - v.T)))
    return 0.5 * (v + v.T), asym
