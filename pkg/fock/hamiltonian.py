import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import psutil

from fock.basis import FockBasis
from fock.params import HamiltonianParams
from lattice.topology import Bond, KagomeTopology
from utils.errors import CapacityError, ConfigurationError

logger = logging.getLogger(__name__)

HERMITICITY_RTOL = 1e-12
# fraction of available memory a dense matrix may take
DENSE_MEMORY_FRACTION = 0.5


@dataclass(frozen=True)
class HermitianOperator:
    """
    Dense Hermitian matrix acting on one Fock basis.

    Attributes:
        matrix: Complex (dim, dim) array.
        basis: The basis that labels rows and columns.
        energy_unit: Joules per reported energy unit (hbar * Omega_R for Hamiltonians, 1 otherwise).
    """

    matrix: np.ndarray = field(repr=False, compare=False)
    basis: FockBasis
    energy_unit: float = 1.0

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def hermiticity_error(self) -> float:
        """Return ||H - H^dagger|| / max(||H||, tiny)."""
        norm = np.linalg.norm(self.matrix)
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T) / max(norm, np.finfo(float).tiny))

    def is_hermitian(self, rtol: float = HERMITICITY_RTOL) -> bool:
        return self.hermiticity_error() <= rtol

    def expectation(self, vector: np.ndarray) -> float:
        """<v|H|v> / <v|v> as a real number."""
        vector = np.asarray(vector)
        return float(np.real(np.vdot(vector, self.matrix @ vector)) / np.real(np.vdot(vector, vector)))


def _check_dense_capacity(dimension: int) -> None:
    needed = dimension * dimension * np.dtype(np.complex128).itemsize
    available = psutil.virtual_memory().available
    if needed > DENSE_MEMORY_FRACTION * available:
        raise CapacityError(f'Dense {dimension}x{dimension} matrix needs {needed / 2**30:.1f} GiB, '
                            f'only {available / 2**30:.1f} GiB available')


def _check_consistency(basis: FockBasis, topology: KagomeTopology) -> None:
    if tuple(basis.sites) != tuple(topology.sites):
        raise ConfigurationError(f'Basis sites {basis.sites} do not match topology sites {topology.sites}')


def hopping_operator(basis: FockBasis, topology: KagomeTopology,
                     couplings: Mapping[Bond, float] | None = None) -> np.ndarray:
    """
    Build the real hopping matrix -sum_<k,k'> kappa_kk' (a_k^dag a_k' + h.c.).

    Args:
        basis (FockBasis): Row/column labels.
        topology (KagomeTopology): Supplies the bonds.
        couplings (Mapping[Bond, float] | None): Per-bond kappa; None gives the unit hopping pattern.

    Returns:
        np.ndarray: Real symmetric (dim, dim) array.
    """
    _check_consistency(basis, topology)
    _check_dense_capacity(basis.dimension)
    matrix = np.zeros((basis.dimension, basis.dimension))
    for u, v in topology.bonds:
        kappa = 1.0 if couplings is None else couplings[(u, v)]
        if kappa == 0.0:
            continue
        for target_site, source_site in ((u, v), (v, u)):
            target, source = basis.site_column[target_site], basis.site_column[source_site]
            rows = np.flatnonzero(basis.states[:, source] > 0)
            if rows.size == 0:
                continue
            moved = basis.states[rows].copy()
            amplitude = np.sqrt((moved[:, target] + 1) * moved[:, source])
            moved[:, target] += 1
            moved[:, source] -= 1
            matrix[basis.positions(moved), rows] -= kappa * amplitude
    return matrix


def build_hamiltonian(params: HamiltonianParams, basis: FockBasis, topology: KagomeTopology) -> HermitianOperator:
    """
    Build the grand-canonical tight-binding Hamiltonian H - mu N in one basis, in joules.

    Args:
        params (HamiltonianParams): omega_d, per-bond couplings and mu.
        basis (FockBasis): Fixed-N (or truncated) occupation basis.
        topology (KagomeTopology): Cell graph.

    Returns:
        HermitianOperator: Diagonal (hbar omega_d - mu) * N, hopping elements -kappa * sqrt((n_k + 1) n_k').

    Raises:
        ConfigurationError: If the coupling map misses a bond or the basis does not match the topology.
        CapacityError: If the dense matrix would not fit in memory.
    """
    _check_consistency(basis, topology)
    params.require_bonds(topology)
    matrix = hopping_operator(basis, topology, params.couplings).astype(np.complex128)
    matrix[np.diag_indices_from(matrix)] += params.onsite_energy * basis.totals
    operator = HermitianOperator(matrix=matrix, basis=basis, energy_unit=params.energy_unit)
    logger.debug(f'Built Hamiltonian of dimension {operator.dimension} for N={basis.n_total}')
    return operator


def number_operator(basis: FockBasis) -> HermitianOperator:
    """Total photon number N as a diagonal operator on the basis."""
    return HermitianOperator(matrix=np.diag(basis.totals.astype(np.complex128)), basis=basis)


def site_number_operator(basis: FockBasis, site: int) -> HermitianOperator:
    """n_k as a diagonal operator on the basis."""
    return HermitianOperator(matrix=np.diag(basis.site_numbers(site).astype(np.complex128)), basis=basis)
