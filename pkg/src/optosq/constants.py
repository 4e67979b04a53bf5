"""Physical constants (CODATA / exact SI values)."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants used for temperature/occupation conversions.

    hbar is the 2018 CODATA reduced Planck constant, k_b the exact SI
    Boltzmann constant.  Values in J*s and J/K.
    """

    hbar: float = 1.054571817e-34
    k_b: float = 1.380649e-23


CONSTANTS = PhysicalConstants()

HBAR = CONSTANTS.hbar
K_B = CONSTANTS.k_b
