"""Physical constants used by the macrospin model (SI units)."""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 values; ``gamma`` is always derived, never stored.

    ``gamma = 2 mu_B mu_0 / hbar`` has units m/(A s), so magnetic fields
    are expressed in A/m throughout and ``gamma * H`` is a rate in 1/s.
    """

    mu_B: float = 9.2740100783e-24   # Bohr magneton [J/T]
    mu_0: float = 1.25663706212e-6   # vacuum permeability [T m/A]
    hbar: float = 1.054571817e-34    # reduced Planck constant [J s]
    q: float = 1.602176634e-19       # elementary charge [C]
    k_B: float = 1.380649e-23        # Boltzmann constant [J/K]

    @property
    def gamma(self) -> float:
        """Electron gyromagnetic ratio, 2 mu_B mu_0 / hbar [m/(A s)]."""
        return 2.0 * self.mu_B * self.mu_0 / self.hbar


CONSTANTS = PhysicalConstants()
