import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np
from scipy.special import comb

from data.constants import MAX_ED_PHOTONS
from lattice.topology import KagomeTopology
from utils.errors import CapacityError, SectorError

logger = logging.getLogger(__name__)


def _compositions(total: int, slots: int) -> Iterator[tuple[int, ...]]:
    """Yield every occupation vector of `slots` sites summing to `total`, in ascending lexicographic order."""
    if slots == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, slots - 1):
            yield (head, *tail)


@dataclass(frozen=True)
class FockBasis:
    """
    Fixed-N occupation basis over the sites of a topology.

    Attributes:
        n_total: Total photon number N.
        sites: Site identifiers in column order of `states`.
        states: Integer array of shape (dim, n_sites), one occupation vector per row, lexicographically ascending.
        fixed_n: False for a truncated basis holding every sector up to n_total (used for commutator checks).
    """

    n_total: int
    sites: tuple[int, ...]
    states: np.ndarray = field(repr=False, compare=False)
    fixed_n: bool = True

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(n) for n in row): position for position, row in enumerate(self.states)}

    @cached_property
    def site_column(self) -> dict[int, int]:
        return {site: column for column, site in enumerate(self.sites)}

    @cached_property
    def key_weights(self) -> np.ndarray:
        # base-(N+1) digits, first site most significant: lexicographic order == ascending keys
        base = self.n_total + 1
        return base ** np.arange(len(self.sites) - 1, -1, -1, dtype=np.int64)

    @cached_property
    def keys(self) -> np.ndarray:
        return self.states @ self.key_weights

    @cached_property
    def totals(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def positions(self, occupations: np.ndarray) -> np.ndarray:
        """
        Vectorized index lookup for a batch of occupation vectors.

        Raises:
            SectorError: If any vector is not part of the basis.
        """
        occupations = np.asarray(occupations, dtype=np.int64)
        if occupations.size and (occupations.min() < 0 or occupations.max() > self.n_total):
            raise SectorError(f'Occupations outside 0..{self.n_total} are not in this basis')
        wanted = occupations @ self.key_weights
        found = np.searchsorted(self.keys, wanted)
        found = np.clip(found, 0, self.dimension - 1)
        if not np.array_equal(self.keys[found], wanted):
            raise SectorError(f'Some occupations are not in the N={self.n_total} basis')
        return found

    @property
    def dimension(self) -> int:
        return int(self.states.shape[0])

    def __len__(self) -> int:
        return self.dimension

    def lookup(self, occupation) -> int:
        """
        Return the basis index of an occupation vector.

        Raises:
            SectorError: If the vector is not part of this sector.
        """
        key = tuple(int(n) for n in occupation)
        try:
            return self.index[key]
        except KeyError:
            raise SectorError(f'Occupation {key} is not in the N={self.n_total} sector') from None

    def occupation(self, position: int) -> tuple[int, ...]:
        return tuple(int(n) for n in self.states[position])

    def site_numbers(self, site: int) -> np.ndarray:
        """Occupation of `site` in every basis state (column view)."""
        return self.states[:, self.site_column[site]]

    def localized(self, site: int, photons: int | None = None) -> tuple[int, ...]:
        """Occupation vector with all (or `photons`) photons on one site."""
        photons = self.n_total if photons is None else photons
        vector = [0] * len(self.sites)
        vector[self.site_column[site]] = photons
        return tuple(vector)


def basis_dimension(n_total: int, n_sites: int = 12) -> int:
    """C(N + L - 1, L - 1) for N bosons on L sites."""
    return int(comb(n_total + n_sites - 1, n_sites - 1, exact=True))


def enumerate_basis(n_total: int, topology: KagomeTopology) -> FockBasis:
    """
    Enumerate the fixed-N sector.

    Args:
        n_total (int): Total photon number, 0 <= N <= 8.
        topology (KagomeTopology): Supplies the site order.

    Returns:
        FockBasis: Lexicographically ordered basis of dimension C(N + 11, 11).

    Raises:
        CapacityError: If N lies outside the guarded range.
    """
    if not 0 <= n_total <= MAX_ED_PHOTONS:
        raise CapacityError(f'Photon number {n_total} outside the exact-diagonalization guard 0..{MAX_ED_PHOTONS}')
    states = np.array(list(_compositions(n_total, len(topology.sites))), dtype=np.int64)
    basis = FockBasis(n_total=n_total, sites=tuple(topology.sites), states=states)
    logger.debug(f'Enumerated N={n_total} sector with {basis.dimension} states')
    return basis


def enumerate_truncated_basis(max_total: int, topology: KagomeTopology) -> FockBasis:
    """
    Enumerate every occupation vector with 0 <= sum <= max_total, in lexicographic order.

    The result spans several sectors at once, so operators built on it can be checked for sector mixing.
    """
    if not 0 <= max_total <= 3:
        raise CapacityError(f'Truncated multi-sector basis is limited to max_total <= 3, got {max_total}')
    states = np.array([row for total in range(max_total + 1) for row in _compositions(total, len(topology.sites))],
                      dtype=np.int64)
    weights = (max_total + 1) ** np.arange(len(topology.sites) - 1, -1, -1, dtype=np.int64)
    states = states[np.argsort(states @ weights, kind='stable')]
    return FockBasis(n_total=max_total, sites=tuple(topology.sites), states=states, fixed_n=False)
