"""optosq: squeezing of a cavity-optomechanical mirror under a modulated drive.

Propagates the classical mean field jointly with the 4x4 quadrature
covariance of the linearized fluctuations, detects and quantifies mirror
quadrature squeezing, and ships the reduced rotating-frame models as
cross-checking oracles.
"""

from .config import ConfigError, ScenarioConfig, load_scenario
from .constants import CONSTANTS, HBAR, K_B, PhysicalConstants
from .integrator import (
    IntegrationControl,
    IntegrationError,
    StiffnessError,
    adaptive_step,
    default_timestep,
    project_symmetric,
    step,
)
from .linearized import (
    ConditioningError,
    CovarianceError,
    FundamentalCheckResult,
    NoiseMatrices,
    Trajectory,
    build_drift_matrix,
    covariance_rhs,
    fundamental_matrix_check,
    ground_state_covariance,
    ground_state_ordered,
    noise_matrix,
    optimal_squeezing_angle,
    ordered_cross_check,
    propagate,
    quadrature_variance,
    rotating_pi4_angle,
    squeezing_db,
    validate_covariance,
)
from .model import (
    CavityGeometry,
    DivergenceError,
    DomainError,
    DriveSpec,
    MeanFieldState,
    SystemParams,
    dimensionless_temperature_from_nbar,
    drive_amplitude,
    effective_detuning,
    g_from_geometry,
    mean_field_rhs,
    nbar_from_dimensionless_temperature,
    nbar_from_temperature,
    periodic_orbit_mean_field,
    xi0,
)
from .reduced import (
    CriticalTemperature,
    ReducedParams,
    ReducedTrajectory,
    RegimeWarning,
    adiabatic_cavity_amplitude,
    cavity_noise_bound,
    critical_nbar,
    critical_temperature,
    lab_frame_mirror_block,
    rwa_covariance_propagate,
    rwa_variance_undamped,
    thermal_estimate_variance,
)

__version__ = "0.1.0"
