from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from data.constants import DEFAULT_UNIT_SCALE, HBAR
from lattice.topology import CELL_BONDS, Bond, KagomeTopology, bond_key
from utils.errors import ConfigurationError


@dataclass(frozen=True)
class HamiltonianParams:
    """
    Physical parameters of the cavity array, stored in SI units.

    Attributes:
        omega_d: Driving (cavity) frequency, rad/s.
        couplings: Hopping strength per bond, J.
        mu: Chemical potential, J.
        unit_scale: Reference frequency Omega_R, rad/s; energies are reported as E / (hbar * Omega_R).
        hbar: Reduced Planck constant, J*s.
    """

    omega_d: float
    couplings: Mapping[Bond, float] = field(default_factory=dict)
    mu: float = 0.0
    unit_scale: float = DEFAULT_UNIT_SCALE
    hbar: float = HBAR

    def __post_init__(self):
        normalized = {}
        for bond, kappa in dict(self.couplings).items():
            u, v = bond
            if np.iscomplexobj(kappa) and np.imag(kappa) != 0:
                raise ConfigurationError(f'Coupling on bond {bond} must be real, got {kappa}')
            kappa = float(np.real(kappa))
            if not np.isfinite(kappa) or kappa < 0:
                raise ConfigurationError(f'Coupling on bond {bond} must be finite and >= 0, got {kappa}')
            normalized[bond_key(int(u), int(v))] = kappa
        object.__setattr__(self, 'couplings', normalized)
        if not self.omega_d > 0:
            raise ConfigurationError(f'omega_d must be > 0, got {self.omega_d}')
        if not self.unit_scale > 0:
            raise ConfigurationError(f'unit_scale must be > 0, got {self.unit_scale}')
        if not self.hbar > 0:
            raise ConfigurationError(f'hbar must be > 0, got {self.hbar}')
        if not np.isfinite(self.mu):
            raise ConfigurationError(f'mu must be finite, got {self.mu}')

    @classmethod
    def uniform(cls, kappa: float, omega_d: float, mu: float = 0.0, bonds: Iterable[Bond] = CELL_BONDS,
                unit_scale: float = DEFAULT_UNIT_SCALE, hbar: float = HBAR) -> 'HamiltonianParams':
        """Parameters with the same coupling (J) on every bond."""
        return cls(omega_d=omega_d, couplings={bond: kappa for bond in bonds}, mu=mu, unit_scale=unit_scale,
                   hbar=hbar)

    @classmethod
    def from_reduced(cls, omega_ratio: float, kappa: float | Mapping[Bond, float], mu: float = 0.0,
                     bonds: Iterable[Bond] = CELL_BONDS, unit_scale: float = DEFAULT_UNIT_SCALE,
                     hbar: float = HBAR) -> 'HamiltonianParams':
        """
        Build parameters from dimensionless inputs.

        Args:
            omega_ratio (float): omega_d / Omega_R.
            kappa (float | Mapping[Bond, float]): Coupling(s) in units of hbar * Omega_R.
            mu (float): Chemical potential in units of hbar * Omega_R.
            bonds (Iterable[Bond]): Bonds that receive a uniform coupling when `kappa` is a scalar.
            unit_scale (float): Omega_R, rad/s.
            hbar (float): Reduced Planck constant, J*s.
        """
        energy_unit = hbar * unit_scale
        if isinstance(kappa, Mapping):
            couplings = {bond: value * energy_unit for bond, value in kappa.items()}
        else:
            couplings = {bond: kappa * energy_unit for bond in bonds}
        return cls(omega_d=omega_ratio * unit_scale, couplings=couplings, mu=mu * energy_unit,
                   unit_scale=unit_scale, hbar=hbar)

    @property
    def energy_unit(self) -> float:
        """hbar * Omega_R in joules."""
        return self.hbar * self.unit_scale

    @property
    def onsite_energy(self) -> float:
        """hbar * omega_d - mu in joules."""
        return self.hbar * self.omega_d - self.mu

    @property
    def max_coupling(self) -> float:
        return max(self.couplings.values(), default=0.0)

    def coupling(self, u: int, v: int) -> float:
        try:
            return self.couplings[bond_key(u, v)]
        except KeyError:
            raise ConfigurationError(f'No coupling given for bond {bond_key(u, v)}') from None

    def reduced(self, energy: float) -> float:
        """Convert an energy in joules to units of hbar * Omega_R."""
        return energy / self.energy_unit

    def with_couplings(self, couplings: Mapping[Bond, float]) -> 'HamiltonianParams':
        return replace(self, couplings=dict(couplings))

    def with_mu(self, mu: float) -> 'HamiltonianParams':
        return replace(self, mu=mu)

    def scaled_couplings(self, factor: float) -> 'HamiltonianParams':
        return replace(self, couplings={bond: kappa * factor for bond, kappa in self.couplings.items()})

    def require_bonds(self, topology: KagomeTopology) -> None:
        """
        Raise ConfigurationError unless every bond of the cell has a coupling.
        """
        missing = [bond for bond in topology.bonds if bond not in self.couplings]
        if missing:
            raise ConfigurationError(f'Coupling map is missing bonds {missing}')
        extra = [bond for bond in self.couplings if bond not in topology.bond_set]
        if extra:
            raise ConfigurationError(f'Coupling map names bonds that are not in the cell: {extra}')
