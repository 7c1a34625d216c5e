import logging
from dataclasses import dataclass

import numpy as np

from data.constants import MAX_STATEVECTOR_PHYS_DIM
from fock.basis import enumerate_basis
from fock.hamiltonian import build_hamiltonian
from fock.params import HamiltonianParams
from peps.contraction import contract_scalar
from peps.effective import number_moments, peps_energy
from peps.operators import local_operators
from peps.state import PepsState
from peps.statevector import peps_to_statevector, project_to_sector

logger = logging.getLogger(__name__)


def peps_local_occupations(state: PepsState) -> dict[int, float]:
    """
    n_k = <Psi|n_k|Psi> / <Psi|Psi> for every site.
    """
    norm = contract_scalar(state, state).real
    number = local_operators(state.phys_dim)['n']
    return {site: float(contract_scalar(state, state, {site: number}).real / norm) for site in state.topology.sites}


@dataclass(frozen=True)
class PepsReadouts:
    """
    Energy readouts of an optimized state, in units of hbar * Omega_R.

    Attributes:
        functional_energy: <H - mu N + penalty (N - N0)^2>, the quantity the optimizer minimizes.
        mean_number: <N>.
        number_variance: <N^2> - <N>^2.
        sector_energy: <H - mu N> of the state projected onto the N0 sector (None when d > 3).
        sector_weight: Squared norm of that projection (None when d > 3).
    """

    functional_energy: float
    mean_number: float
    number_variance: float
    sector_energy: float | None = None
    sector_weight: float | None = None


def peps_readouts(state: PepsState, params: HamiltonianParams) -> PepsReadouts:
    """
    Collect the grand-canonical and the sector-projected readouts of a state.
    """
    functional = peps_energy(state, params)
    mean, second = number_moments(state)
    sector_energy = sector_weight = None
    if state.phys_dim <= MAX_STATEVECTOR_PHYS_DIM:
        basis = enumerate_basis(state.config.n_total, state.topology)
        vector = peps_to_statevector(state)
        amplitudes = project_to_sector(vector, basis)
        sector_weight = float(np.vdot(amplitudes, amplitudes).real / np.vdot(vector, vector).real)
        if sector_weight > 0.0:
            hamiltonian = build_hamiltonian(params, basis, state.topology)
            sector_energy = params.reduced(hamiltonian.expectation(amplitudes))
    else:
        logger.info(f'Skipping sector projection for d = {state.phys_dim}')
    return PepsReadouts(functional, mean, max(second - mean ** 2, 0.0), sector_energy, sector_weight)
