import logging
from functools import lru_cache
from typing import Mapping, NamedTuple

import numpy as np
import pandas as pd
import scipy.linalg

from fock.basis import FockBasis, enumerate_basis
from fock.hamiltonian import HermitianOperator, build_hamiltonian, hopping_operator
from fock.params import HamiltonianParams
from lattice.topology import KagomeTopology
from utils.errors import ArgumentError, NumericalError, StateError

logger = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-10
NORM_TOL = 1e-8


class Eigenpair(NamedTuple):
    energy: float
    vector: np.ndarray


def _eigh(matrix: np.ndarray, k_lowest: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """eigh on the real part when the matrix is real, with an optional lowest-k window."""
    subset = None if k_lowest is None or k_lowest == matrix.shape[0] else [0, k_lowest - 1]
    if not np.any(matrix.imag):
        values, vectors = scipy.linalg.eigh(matrix.real, subset_by_index=subset)
        return values, vectors.astype(np.complex128)
    return scipy.linalg.eigh(matrix, subset_by_index=subset)


def ed_spectrum(H: HermitianOperator, k_lowest: int) -> list[Eigenpair]:
    """
    Return the k_lowest smallest eigenpairs of a sector Hamiltonian, ascending.

    Args:
        H (HermitianOperator): Dense sector Hamiltonian.
        k_lowest (int): Number of eigenpairs, 1 <= k_lowest <= dim.

    Returns:
        list[Eigenpair]: Energies (same units as H) with unit-norm eigenvectors.

    Raises:
        ArgumentError: If k_lowest is out of range.
        NumericalError: If an eigenpair residual exceeds 1e-10 * ||H||.
    """
    if not 1 <= k_lowest <= H.dimension:
        raise ArgumentError(f'k_lowest must lie in 1..{H.dimension}, got {k_lowest}')
    values, vectors = _eigh(H.matrix, k_lowest)
    scale = max(np.linalg.norm(H.matrix), np.finfo(float).tiny)
    residuals = np.linalg.norm(H.matrix @ vectors - vectors * values, axis=0)
    worst = float(residuals.max())
    if worst > RESIDUAL_RTOL * scale:
        raise NumericalError(f'Eigenpair residual {worst:.3e} exceeds {RESIDUAL_RTOL:.0e} * ||H||')
    return [Eigenpair(float(value), vectors[:, column]) for column, value in enumerate(values)]


def local_occupations(state: np.ndarray, basis: FockBasis) -> dict[int, float]:
    """
    Equilibrium photon population n_k = sum_states |amplitude|^2 n_k(state).

    Raises:
        StateError: If the state norm deviates from 1 by more than 1e-8 or the shape does not match the basis.
    """
    state = np.asarray(state)
    if state.shape != (basis.dimension,):
        raise StateError(f'State of shape {state.shape} does not match basis dimension {basis.dimension}')
    weights = np.abs(state) ** 2
    norm = float(weights.sum())
    if abs(norm - 1.0) > NORM_TOL:
        raise StateError(f'State norm {norm:.12f} deviates from 1 by more than {NORM_TOL:.0e}')
    profile = weights @ basis.states
    return {site: float(profile[column]) for site, column in basis.site_column.items()}


def ground_state(params: HamiltonianParams, n_total: int, topology: KagomeTopology) -> tuple[Eigenpair, FockBasis]:
    """Lowest eigenpair of the N-photon sector together with the basis it lives in."""
    basis = enumerate_basis(n_total, topology)
    pair = ed_spectrum(build_hamiltonian(params, basis, topology), 1)[0]
    return pair, basis


def sector_ground_energy(params: HamiltonianParams, n_total: int, topology: KagomeTopology) -> float:
    """E_G(N) in joules, grand-canonical shift -mu N included."""
    return ground_state(params, n_total, topology)[0].energy


@lru_cache(maxsize=16)
def _hopping_top_eigenvalue(n_total: int, topology: KagomeTopology) -> float:
    if n_total == 0:
        return 0.0
    pattern = hopping_operator(enumerate_basis(n_total, topology), topology)
    return float(-scipy.linalg.eigh(pattern, eigvals_only=True, subset_by_index=[0, 0])[0])


def uniform_ground_energy(kappa: float, onsite_energy: float, n_total: int, topology: KagomeTopology) -> float:
    """
    E_G(N) for uniform couplings via E = (hbar omega_d - mu) N - kappa * lambda_max(hopping pattern).

    The pattern eigenvalue is cached per (N, topology), so scans over kappa or mu cost one eigensolve per sector.
    """
    return onsite_energy * n_total - kappa * _hopping_top_eigenvalue(n_total, topology)


def spectrum_frame(pairs: list[Eigenpair], params: HamiltonianParams) -> pd.DataFrame:
    energies = np.array([pair.energy for pair in pairs])
    return pd.DataFrame({
        'index': np.arange(len(pairs)),
        'energy_J': energies,
        'energy_over_hbar_OmegaR': energies / params.energy_unit,
    })


def occupations_frame(occupations: Mapping[int, float]) -> pd.DataFrame:
    return pd.DataFrame({'site': list(occupations), 'n_k': list(occupations.values())})
