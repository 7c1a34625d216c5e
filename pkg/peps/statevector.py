"""
Bridges between the PEPS and plain state vectors over the truncated product space (d^12 amplitudes).

Axis k - 1 of the reshaped vector is the occupation of site k, so flat indices follow the same lexicographic
order as the Fock basis.
"""

import numpy as np
import opt_einsum as oe

from data.constants import MAX_STATEVECTOR_PHYS_DIM, N_SITES
from fock.basis import FockBasis
from peps.contraction import outer_core
from peps.layout import GROUPS, group_outer
from peps.operators import PepsHamiltonian, local_operators
from peps.state import PepsState
from utils.errors import CapacityError, SectorError


def _require_small(phys_dim: int) -> None:
    if phys_dim > MAX_STATEVECTOR_PHYS_DIM:
        raise CapacityError(f'State vector of d^12 amplitudes refused for d = {phys_dim} '
                            f'(limit d <= {MAX_STATEVECTOR_PHYS_DIM})')


def peps_to_statevector(state: PepsState) -> np.ndarray:
    """
    Expand the PEPS into all d^12 coefficients C(A^{i_1}, ..., A^{i_12}).

    Raises:
        CapacityError: If d > 3.
    """
    _require_small(state.phys_dim)
    state.check_bonds()
    d = state.phys_dim
    groups = []
    for head in GROUPS:
        inner, tip = state.array(head), outer_core(state.array(group_outer(head)))
        ket = oe.contract('iabcd,jbe->ijcade', inner, tip)
        groups.append(ket.reshape(d, d, ket.shape[2] * ket.shape[3], ket.shape[4] * ket.shape[5]))

    first, *middle, last = groups
    amplitudes = np.zeros(d ** N_SITES, dtype=np.complex128)
    for closing in range(first.shape[2]):
        partial = first[:, :, closing, :].reshape(d * d, -1)
        for group in middle:
            partial = oe.contract('pr,ijrs->pijs', partial, group).reshape(-1, group.shape[3])
        amplitudes += oe.contract('pr,ijr->pij', partial, last[:, :, :, closing]).reshape(-1)
    # axes now run over sites 2, 3, ..., 12, 1
    ordered = np.moveaxis(amplitudes.reshape((d,) * N_SITES), -1, 0)
    return ordered.reshape(-1)


def product_space_dim(vector: np.ndarray) -> int:
    d = round(len(vector) ** (1.0 / N_SITES))
    if d ** N_SITES != len(vector):
        raise SectorError(f'Vector of length {len(vector)} is not a 12-site product-space vector')
    return d


def project_to_sector(vector: np.ndarray, basis: FockBasis) -> np.ndarray:
    """
    Amplitudes of a product-space vector on the states of a fixed-N basis (not renormalized).
    """
    d = product_space_dim(vector)
    if basis.n_total >= d:
        raise SectorError(f'Sector N={basis.n_total} does not fit local dimension d={d}')
    weights = d ** np.arange(N_SITES - 1, -1, -1, dtype=np.int64)
    return np.asarray(vector)[basis.states @ weights]


def _apply_site(operator: np.ndarray, site: int, psi: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.tensordot(operator, psi, axes=([1], [site - 1])), 0, site - 1)


def statevector_energy(vector: np.ndarray, hamiltonian: PepsHamiltonian) -> float:
    """
    <psi|F|psi> / <psi|psi> on the product space, with F the optimizer's functional.
    """
    d = product_space_dim(vector)
    psi = np.asarray(vector).reshape((d,) * N_SITES)
    totals = np.indices((d,) * N_SITES).sum(axis=0)
    probability = np.abs(psi) ** 2
    norm = probability.sum()
    diagonal = hamiltonian.linear * totals + hamiltonian.penalty * totals ** 2 + hamiltonian.constant
    energy = float(np.sum(probability * diagonal))
    ops = local_operators(d)
    for (u, v), kappa in hamiltonian.couplings.items():
        if kappa == 0.0:
            continue
        hopped = _apply_site(ops['ad'], u, _apply_site(ops['a'], v, psi))
        energy -= 2.0 * kappa * np.vdot(psi, hopped).real
    return energy / norm
