import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from fock.basis import FockBasis
from fock.hamiltonian import HermitianOperator
from utils.errors import ConfigurationError, NumericalError, StateError

NORM_TOL = 1e-10
INITIAL_NORM_TOL = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """
    Uniform grid of dimensionless times tau = Omega_R * t.

    Attributes:
        t_start: First sample.
        t_end: Last sample, strictly greater than t_start.
        n_samples: Number of samples, at least 2.
    """

    t_start: float = 0.0
    t_end: float = 30.0
    n_samples: int = 3001

    def __post_init__(self):
        if self.n_samples < 2:
            raise ConfigurationError(f'n_samples must be >= 2, got {self.n_samples}')
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)) or self.t_end <= self.t_start:
            raise ConfigurationError(f'Need t_start < t_end, got [{self.t_start}, {self.t_end}]')

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_samples)

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / (self.n_samples - 1)

    @classmethod
    def with_step(cls, t_end: float, step: float, t_start: float = 0.0) -> 'TimeGrid':
        """Grid from t_start to (about) t_end with spacing no larger than `step`."""
        if not step > 0:
            raise ConfigurationError(f'step must be > 0, got {step}')
        return cls(t_start, t_end, int(np.ceil((t_end - t_start) / step)) + 1)


class SpectralPropagator:
    """
    exp(-i H t / hbar) from one full eigendecomposition of a sector Hamiltonian.

    Energies are divided by `H.energy_unit`, so the propagator advances in the dimensionless time of `TimeGrid`.
    """

    def __init__(self, H: HermitianOperator):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.hamiltonian = H
        matrix = H.matrix / H.energy_unit
        if not np.any(matrix.imag):
            energies, vectors = scipy.linalg.eigh(matrix.real)
            vectors = vectors.astype(np.complex128)
        else:
            energies, vectors = scipy.linalg.eigh(matrix)
        self.energies = energies
        self.vectors = vectors
        self.logger.debug(f'Diagonalized sector of dimension {H.dimension}, '
                          f'E in [{energies[0]:.6g}, {energies[-1]:.6g}] hbar*Omega_R')

    @property
    def basis(self) -> FockBasis:
        return self.hamiltonian.basis

    def _check_initial(self, psi0: np.ndarray) -> np.ndarray:
        psi0 = np.asarray(psi0, dtype=np.complex128)
        if psi0.shape != (self.hamiltonian.dimension,):
            raise StateError(f'Initial state of shape {psi0.shape} does not match Hamiltonian dimension '
                             f'{self.hamiltonian.dimension}')
        norm = float(np.vdot(psi0, psi0).real)
        if abs(norm - 1.0) > INITIAL_NORM_TOL:
            raise StateError(f'Initial state norm {norm:.12f} deviates from 1')
        return psi0

    def evolve(self, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
        """
        Psi(t) = sum_j exp(-i E_j t) <v_j|psi0> v_j on every grid sample.

        Returns:
            np.ndarray: Shape (n_samples, dim), one state per row.

        Raises:
            StateError: If psi0 does not match the sector or is not unit-norm.
            NumericalError: If the norm drifts by more than 1e-10 at any sample.
        """
        psi0 = self._check_initial(psi0)
        overlaps = self.vectors.conj().T @ psi0
        phases = np.exp(-1j * np.outer(grid.times, self.energies))
        states = (phases * overlaps) @ self.vectors.T
        norms = np.einsum('ij,ij->i', states.conj(), states).real
        drift = float(np.max(np.abs(norms - 1.0)))
        if drift > NORM_TOL:
            raise NumericalError(f'Norm drifted by {drift:.3e} during spectral evolution')
        return states


def spectral_evolve(H: HermitianOperator, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """
    Evolve a fixed-N state under H on a time grid via the full eigendecomposition of H.

    Args:
        H (HermitianOperator): Sector Hamiltonian.
        psi0 (np.ndarray): Unit-norm start vector in the basis of H.
        grid (TimeGrid): Dimensionless sample times.

    Returns:
        np.ndarray: (n_samples, dim) array of states.
    """
    return SpectralPropagator(H).evolve(psi0, grid)


@dataclass(frozen=True)
class ConservationReport:
    """Largest deviations across the grid, energy in hbar * Omega_R."""

    norm_drift: float
    energy_drift: float
    number_drift: float

    def within(self, tolerance: float = NORM_TOL) -> bool:
        return max(self.norm_drift, self.energy_drift, self.number_drift) <= tolerance


def conservation_report(H: HermitianOperator, states: np.ndarray, basis: FockBasis) -> ConservationReport:
    """
    Measure how well norm, <H> and sum_k <n_k> are conserved along an evolution.

    The energy drift is relative to max(|E(0)|, 1) in units of hbar * Omega_R.
    """
    states = np.atleast_2d(states)
    if states.shape[1] != basis.dimension:
        raise StateError(f'States of width {states.shape[1]} do not match basis dimension {basis.dimension}')
    weights = np.abs(states) ** 2
    norms = weights.sum(axis=1)
    energies = np.einsum('ti,ij,tj->t', states.conj(), H.matrix / H.energy_unit, states).real
    numbers = weights @ basis.totals
    return ConservationReport(
        norm_drift=float(np.max(np.abs(norms - 1.0))),
        energy_drift=float(np.max(np.abs(energies - energies[0])) / max(abs(energies[0]), 1.0)),
        number_drift=float(np.max(np.abs(numbers - basis.n_total))),
    )
