import math

import pytest

from optosq import DriveSpec, SystemParams

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="session")
def ref_params() -> SystemParams:
    """Parameter set of the bundled reference scenario."""
    return SystemParams(
        omega_m=TWO_PI * 1e6,
        delta_c=TWO_PI * 1e7,
        g=TWO_PI * 100.0,
        gamma_c=TWO_PI * 1e5,
        gamma_m=TWO_PI * 100.0,
        nbar_m=0.0,
    )


@pytest.fixture(scope="session")
def ref_drive(ref_params) -> DriveSpec:
    return DriveSpec.for_system(ref_params, TWO_PI * 3.16e10)
