import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from data.constants import DisorderDistribution
from fock.params import HamiltonianParams
from fock.spectrum import sector_ground_energy
from lattice.topology import CELL_BONDS, Bond, KagomeTopology
from utils.concurrency import ordered_map
from utils.errors import ArgumentError, ConfigurationError
from utils.randomizer import make_rng, uniform_couplings
from utils.soft_assert import SoftAssertContextManager, Violation

logger = logging.getLogger(__name__)

# relative slack of the envelope check, absorbs eigensolver rounding
BOUND_RTOL = 1e-10


@dataclass(frozen=True)
class DisorderSpec:
    """
    Ensemble of coupling maps drawn independently per bond.

    Attributes:
        kappa_low: Lower end kappa_1 of the interval, J.
        kappa_high: Upper end kappa_2, J.
        master_seed: Seed of the ensemble; realization i uses the stream (master_seed, i).
        realizations: Number of coupling maps.
        distribution: Per-bond distribution (uniform only).
    """

    kappa_low: float
    kappa_high: float
    master_seed: int = 0
    realizations: int = 1
    distribution: DisorderDistribution = DisorderDistribution.UNIFORM

    def __post_init__(self):
        object.__setattr__(self, 'distribution', DisorderDistribution(self.distribution))
        if not (np.isfinite(self.kappa_low) and np.isfinite(self.kappa_high)):
            raise ConfigurationError('Disorder interval must be finite')
        if self.kappa_low < 0 or self.kappa_low > self.kappa_high:
            raise ConfigurationError(f'Need 0 <= kappa_low <= kappa_high, got [{self.kappa_low}, {self.kappa_high}]')
        if self.realizations < 1:
            raise ConfigurationError(f'realizations must be >= 1, got {self.realizations}')
        if self.master_seed < 0:
            raise ConfigurationError(f'master_seed must be >= 0, got {self.master_seed}')

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.kappa_low + self.kappa_high)


def sample_couplings(spec: DisorderSpec, index: int, bonds: Iterable[Bond] = CELL_BONDS) -> dict[Bond, float]:
    """
    Draw the coupling map of realization `index`: i.i.d. uniform kappa on [kappa_low, kappa_high] per bond.

    Args:
        spec (DisorderSpec): The ensemble.
        index (int): Realization index, 0 <= index < spec.realizations.
        bonds (Iterable[Bond]): Bonds in the order the draws are assigned.

    Returns:
        dict[Bond, float]: Deterministic in (master_seed, index).

    Raises:
        ArgumentError: If the index is outside the ensemble.
    """
    if not 0 <= index < spec.realizations:
        raise ArgumentError(f'Realization index {index} outside 0..{spec.realizations - 1}')
    bonds = tuple(bonds)
    draws = uniform_couplings(make_rng(spec.master_seed, index), spec.kappa_low, spec.kappa_high, len(bonds))
    return {bond: float(kappa) for bond, kappa in zip(bonds, draws)}


@dataclass
class DisorderEnergyReport:
    """
    Sector ground energies of every realization against the uniform-kappa envelope (all in J).

    `lower` is E_G at uniform kappa_high, `upper` is E_G at uniform kappa_low.
    """

    n_total: int
    lower: float
    upper: float
    energies: list[float]
    energy_unit: float
    violations: list[Violation] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def frame(self) -> pd.DataFrame:
        energies = np.array(self.energies)
        return pd.DataFrame({
            'realization': np.arange(len(energies)),
            'energy_J': energies,
            'energy_over_hbar_OmegaR': energies / self.energy_unit,
            'lower_over_hbar_OmegaR': self.lower / self.energy_unit,
            'upper_over_hbar_OmegaR': self.upper / self.energy_unit,
            'within_bounds': [(self.lower - self.slack) <= energy <= (self.upper + self.slack)
                              for energy in energies],
        })

    @property
    def slack(self) -> float:
        return BOUND_RTOL * max(abs(self.lower), abs(self.upper), self.energy_unit)


def disorder_energy_bounds(spec: DisorderSpec, n_total: int, params: HamiltonianParams, topology: KagomeTopology,
                           jobs: int | None = 1) -> DisorderEnergyReport:
    """
    Check E_G(uniform kappa_high) <= E_G(realization) <= E_G(uniform kappa_low) for every realization.

    Violations are collected, logged and returned; nothing is raised for them.

    Args:
        spec (DisorderSpec): The ensemble.
        n_total (int): Photon sector.
        params (HamiltonianParams): omega_d, mu and units; couplings are replaced.
        topology (KagomeTopology): Cell graph.
        jobs (int | None): Worker cap for the per-realization diagonalizations.
    """
    bonds = topology.bonds
    upper = sector_ground_energy(params.with_couplings({bond: spec.kappa_low for bond in bonds}), n_total, topology)
    lower = sector_ground_energy(params.with_couplings({bond: spec.kappa_high for bond in bonds}), n_total, topology)

    def realization_energy(index: int) -> float:
        couplings = sample_couplings(spec, index, bonds)
        return sector_ground_energy(params.with_couplings(couplings), n_total, topology)

    energies = ordered_map(realization_energy, range(spec.realizations), jobs)
    report = DisorderEnergyReport(n_total, lower, upper, energies, params.energy_unit)
    checker = SoftAssertContextManager()
    slack = report.slack
    for index, energy in enumerate(energies):
        checker.expect(lower - slack <= energy <= upper + slack, 'disorder-envelope',
                       detail=f'realization {index}: E = {energy / params.energy_unit:.12g} outside '
                              f'[{lower / params.energy_unit:.12g}, {upper / params.energy_unit:.12g}]')
    report.violations = checker.get_failures()
    if report.violations:
        logger.warning(f'{len(report.violations)} of {spec.realizations} realizations leave the uniform-kappa '
                       f'envelope at N={n_total}')
    else:
        logger.info(f'All {spec.realizations} realizations at N={n_total} lie inside the uniform-kappa envelope')
    return report


@dataclass(frozen=True)
class OccupationAsymmetry:
    """Spread (max - min) and mean of the occupations of each sublattice."""

    inner_spread: float
    outer_spread: float
    inner_mean: float
    outer_mean: float


def occupation_asymmetry(occupations: Mapping[int, float], topology: KagomeTopology) -> OccupationAsymmetry:
    """Measure how far a population profile is from inner/outer uniformity."""
    inner = np.array([occupations[site] for site in topology.inner_sites])
    outer = np.array([occupations[site] for site in topology.outer_sites])
    return OccupationAsymmetry(
        inner_spread=float(inner.max() - inner.min()),
        outer_spread=float(outer.max() - outer.min()),
        inner_mean=float(inner.mean()),
        outer_mean=float(outer.mean()),
    )
