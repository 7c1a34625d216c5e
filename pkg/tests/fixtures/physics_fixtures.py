from typing import Callable

import pytest

from fock.basis import FockBasis, enumerate_basis
from fock.params import HamiltonianParams
from lattice.topology import KagomeTopology, build_unit_cell

PHYSICS = None

# omega_d / Omega_R used by every physics test
OMEGA_RATIO = 10.0


@pytest.fixture(scope="session")
def topology() -> KagomeTopology:
    """
    The canonical 12-site cell, built once per session.
    """
    return build_unit_cell()


@pytest.fixture()
def make_params() -> Callable:
    """
    Factory for Hamiltonian parameters given in units of hbar * Omega_R.

    Yields:
        Callable: `factory(kappa=1.0, mu=0.0, omega_ratio=10.0)`, where kappa may be a scalar or a bond mapping.
    """

    def factory(kappa=1.0, mu: float = 0.0, omega_ratio: float = OMEGA_RATIO) -> HamiltonianParams:
        return HamiltonianParams.from_reduced(omega_ratio, kappa, mu=mu)

    yield factory


@pytest.fixture()
def uniform_params(make_params) -> HamiltonianParams:
    """Uniform kappa = 1, omega_d = 10 Omega_R, mu = 0."""
    return make_params()


@pytest.fixture()
def make_basis(topology) -> Callable:
    """
    Factory for fixed-N bases on the canonical cell, cached for the duration of one test.
    """
    _bases: dict[int, FockBasis] = {}

    def factory(n_total: int) -> FockBasis:
        if n_total not in _bases:
            _bases[n_total] = enumerate_basis(n_total, topology)
        return _bases[n_total]

    yield factory
