"""Physical parameters, modulated drive schedule, and mean-field equations.

All frequencies and rates are angular (rad/s).  The mirror mode `b` and the
cavity mode `a` are dimensionless bosonic amplitudes; quadratures follow the
convention X = (s^dag + s)/sqrt(2), Y = i(s^dag - s)/sqrt(2), so the vacuum
variance is 1/2.
"""

import cmath
import math
from dataclasses import dataclass, replace

from .constants import HBAR, K_B

SQRT2 = math.sqrt(2.0)

#: default factor for the large-detuning regime flag (delta_c >= factor * omega_m)
LARGE_DETUNING_FACTOR = 5.0


class DomainError(ValueError):
    """A physical parameter is outside its admissible domain."""


@dataclass(frozen=True)
class CavityGeometry:
    """Optional geometric inputs from which the coupling rate can be derived.

    Attributes
    ----------
    omega_c : float
        Cavity resonance frequency (rad/s).
    m_eff : float
        Effective mass of the moving mirror (kg).
    cavity_length : float
        Rest length of the cavity (m).
    """

    omega_c: float
    m_eff: float
    cavity_length: float

    def __post_init__(self):
        for name in ("omega_c", "m_eff", "cavity_length"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"geometry field {name} must be positive")


def g_from_geometry(geometry: CavityGeometry, omega_m: float) -> float:
    """Radiation-pressure coupling rate from cavity geometry.

    g = omega_c * x_zpf / L with x_zpf = sqrt(hbar / (2 m_eff omega_m)).
    """
    if not omega_m > 0.0:
        raise DomainError("omega_m must be positive")
    x_zpf = math.sqrt(HBAR / (2.0 * geometry.m_eff * omega_m))
    return geometry.omega_c * x_zpf / geometry.cavity_length


@dataclass(frozen=True)
class SystemParams:
    """All rates defining the driven optomechanical system (rad/s).

    Attributes
    ----------
    omega_m : float
        Mirror frequency.
    delta_c : float
        Drive-cavity detuning (cavity frequency minus drive frequency).
    g : float
        Optomechanical coupling rate.
    gamma_c : float
        Cavity energy decay rate.
    gamma_m : float
        Mirror energy decay rate.
    nbar_m : float
        Thermal occupation of the mirror's bath (dimensionless, >= 0).
        The cavity bath is vacuum.
    geometry : CavityGeometry, optional
        If given, carried along for provenance; `g` is still authoritative.
    """

    omega_m: float
    delta_c: float
    g: float
    gamma_c: float
    gamma_m: float
    nbar_m: float = 0.0
    geometry: CavityGeometry | None = None

    def __post_init__(self):
        for name in ("omega_m", "delta_c", "gamma_c", "gamma_m"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be strictly positive")
        if self.g < 0.0:
            raise DomainError("g must be >= 0")
        if self.nbar_m < 0.0:
            raise DomainError("nbar_m must be >= 0")

    def is_large_detuning(self, factor: float = LARGE_DETUNING_FACTOR) -> bool:
        """True when the detuning supports adiabatic cavity elimination."""
        return self.delta_c >= factor * self.omega_m

    def with_nbar(self, nbar_m: float) -> "SystemParams":
        return replace(self, nbar_m=nbar_m)


def xi0(params: SystemParams, omega0: float) -> float:
    """Average optically induced mirror frequency shift / parametric gain rate.

    xi0 = g^2 Omega0^2 delta_c / (delta_c^2 + gamma_c^2/4)^2.
    """
    d2 = params.delta_c**2 + params.gamma_c**2 / 4.0
    return params.g**2 * omega0**2 * params.delta_c / d2**2


@dataclass(frozen=True)
class DriveSpec:
    """Sinusoidally modulated drive amplitude schedule.

    The amplitude is Omega(t) = omega0 * sin(modulation_freq * t) with
    modulation_freq = omega_m - xi0, the shifted mirror resonance.
    """

    omega0: float
    xi0: float
    modulation_freq: float

    @classmethod
    def for_system(cls, params: SystemParams, omega0: float) -> "DriveSpec":
        """Build the schedule for `params`, caching xi0 in closed form."""
        shift = xi0(params, omega0)
        return cls(omega0=omega0, xi0=shift, modulation_freq=params.omega_m - shift)


def drive_amplitude(t: float, drive: DriveSpec) -> float:
    """Drive amplitude Omega(t) = Omega0 sin[(omega_m - xi0) t] (rad/s)."""
    return drive.omega0 * math.sin(drive.modulation_freq * t)


@dataclass(frozen=True)
class MeanFieldState:
    """Classical expectation values of the cavity and mirror amplitudes."""

    a_mean: complex
    b_mean: complex

    def __post_init__(self):
        if not (cmath.isfinite(self.a_mean) and cmath.isfinite(self.b_mean)):
            raise DivergenceError("non-finite mean-field state", t_last_good=None)

    @classmethod
    def rest(cls) -> "MeanFieldState":
        return cls(0.0 + 0.0j, 0.0 + 0.0j)


class DivergenceError(ArithmeticError):
    """Integration produced a non-finite state.

    `t_last_good` carries the last time at which the state was finite,
    or None if divergence occurred at construction.
    """

    def __init__(self, message: str, t_last_good: float | None):
        super().__init__(message)
        self.t_last_good = t_last_good


def effective_detuning(params: SystemParams, b_mean: complex) -> float:
    """Mirror-displacement-shifted detuning Delta(t) = delta_c - 2 g Re<b>."""
    return params.delta_c - 2.0 * params.g * b_mean.real


def mean_field_rhs(
    state: MeanFieldState, t: float, params: SystemParams, drive: DriveSpec
) -> MeanFieldState:
    """Time derivative of the mean-field amplitudes.

    d<a>/dt = -(i Delta(t) + gamma_c/2) <a> - i Omega(t)
    d<b>/dt = -(i omega_m + gamma_m/2) <b> + i g |<a>|^2
    """
    a, b = state.a_mean, state.b_mean
    delta = effective_detuning(params, b)
    da = -(1j * delta + 0.5 * params.gamma_c) * a - 1j * drive_amplitude(t, drive)
    db = -(1j * params.omega_m + 0.5 * params.gamma_m) * b + 1j * params.g * abs(a) ** 2
    return MeanFieldState(da, db)


def mean_quadratures(s_mean: complex) -> tuple[float, float]:
    """(<X>, <Y>) of an amplitude: <X> = sqrt(2) Re<s>, <Y> = sqrt(2) Im<s>."""
    return SQRT2 * s_mean.real, SQRT2 * s_mean.imag


def periodic_orbit_mean_field(
    params: SystemParams, drive: DriveSpec, refine: int = 2
) -> MeanFieldState:
    """Harmonic-balance periodic orbit of the mean field, evaluated at t=0.

    The sudden switch-on of the modulated drive leaves a free-ringing mirror
    transient that the parametric process amplifies at rate ~xi0/2, which
    eventually invalidates the linearization on long horizons.  Starting on
    the periodic orbit removes that classical seed.

    The orbit keeps the cavity response at the drive sidebands +-w
    (w = modulation_freq) and the mirror response at {0, +-2w}, iterating
    `refine` times on the DC detuning shift from the static mirror
    displacement.
    """
    w = drive.modulation_freq
    half_omega0 = 0.5 * drive.omega0
    delta_eff = params.delta_c
    a_plus = a_minus = b_0 = b_p2 = b_m2 = 0.0 + 0.0j
    for _ in range(refine + 1):
        a_plus = -half_omega0 / (1j * (delta_eff + w) + 0.5 * params.gamma_c)
        a_minus = half_omega0 / (1j * (delta_eff - w) + 0.5 * params.gamma_c)
        # |<a>|^2 harmonics: DC and e^{+-2iwt}
        p_0 = abs(a_plus) ** 2 + abs(a_minus) ** 2
        p_2 = a_plus * a_minus.conjugate()
        b_0 = 1j * params.g * p_0 / (1j * params.omega_m + 0.5 * params.gamma_m)
        b_p2 = 1j * params.g * p_2 / (1j * (params.omega_m + 2 * w) + 0.5 * params.gamma_m)
        b_m2 = (
            1j
            * params.g
            * p_2.conjugate()
            / (1j * (params.omega_m - 2 * w) + 0.5 * params.gamma_m)
        )
        delta_eff = params.delta_c - 2.0 * params.g * b_0.real
    return MeanFieldState(a_plus + a_minus, b_0 + b_p2 + b_m2)


def nbar_from_dimensionless_temperature(tau: float) -> float:
    """Bose-Einstein occupation from tau = k_B T / (hbar omega_m); tau=0 -> 0."""
    if tau < 0.0:
        raise DomainError("dimensionless temperature must be >= 0")
    if tau == 0.0:
        return 0.0
    return 1.0 / math.expm1(1.0 / tau)


def dimensionless_temperature_from_nbar(nbar: float) -> float:
    """Inverse of `nbar_from_dimensionless_temperature`; nbar=0 -> 0."""
    if nbar < 0.0:
        raise DomainError("nbar must be >= 0")
    if nbar == 0.0:
        return 0.0
    return 1.0 / math.log1p(1.0 / nbar)


def nbar_from_temperature(temperature: float, omega_m: float) -> float:
    """Occupation of a bath at `temperature` (K) for a mode at omega_m (rad/s)."""
    return nbar_from_dimensionless_temperature(
        K_B * temperature / (HBAR * omega_m) if temperature > 0.0 else 0.0
    )
