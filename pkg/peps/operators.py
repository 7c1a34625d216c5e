from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from fock.params import HamiltonianParams
from lattice.topology import Bond, KagomeTopology


@lru_cache(maxsize=None)
def local_operators(phys_dim: int) -> dict[str, np.ndarray]:
    """
    Truncated bosonic single-site operators of size d x d.

    Keys: 'I', 'n', 'n2', 'a' (annihilation) and 'ad' (creation). Truncation at n = d - 1 is exact inside
    a sector with at most d - 1 photons.
    """
    levels = np.arange(phys_dim, dtype=float)
    lower = np.diag(np.sqrt(levels[1:]), k=1).astype(np.complex128)
    number = np.diag(levels).astype(np.complex128)
    operators = {
        'I': np.eye(phys_dim, dtype=np.complex128),
        'n': number,
        'n2': number @ number,
        'a': lower,
        'ad': lower.conj().T.copy(),
    }
    for matrix in operators.values():
        matrix.setflags(write=False)
    return operators


@dataclass(frozen=True)
class PepsHamiltonian:
    """
    The functional minimized by the optimizer, in units of hbar * Omega_R:

        F = onsite * N - sum_<k,k'> kappa_kk' (a_k^dag a_k' + h.c.) + penalty * (N - target)^2

    Expanded as linear * N + penalty * N^2 + constant with linear = onsite - 2 penalty target and
    constant = penalty target^2.
    """

    onsite: float
    couplings: Mapping[Bond, float]
    penalty: float
    target: int

    @classmethod
    def from_params(cls, params: HamiltonianParams, n_total: int, number_penalty: float | None,
                    topology: KagomeTopology) -> 'PepsHamiltonian':
        params.require_bonds(topology)
        onsite = params.reduced(params.onsite_energy)
        couplings = {bond: params.reduced(kappa) for bond, kappa in params.couplings.items()}
        if number_penalty is None:
            max_degree = max(topology.degree(site) for site in topology.sites)
            number_penalty = default_penalty(onsite, max(couplings.values(), default=0.0), max_degree)
        return cls(onsite=onsite, couplings=couplings, penalty=float(number_penalty), target=n_total)

    @property
    def linear(self) -> float:
        return self.onsite - 2.0 * self.penalty * self.target

    @property
    def constant(self) -> float:
        return self.penalty * self.target ** 2

    def coupling(self, u: int, v: int) -> float:
        return self.couplings[(u, v) if u < v else (v, u)]


def default_penalty(onsite: float, max_coupling: float, max_degree: int) -> float:
    """
    Penalty weight that puts every other photon-number sector above the target one.

    Sector ground energies of the free-photon model grow linearly in N with slope at most |onsite| + max_degree *
    max_coupling in magnitude, so twice that slope dominates any energy gained by leaving the target sector.
    """
    return 2.0 * (abs(onsite) + max_degree * max_coupling) or 1.0
