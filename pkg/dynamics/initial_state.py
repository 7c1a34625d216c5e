import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from data.constants import InitialStateKind
from fock.basis import FockBasis
from utils.errors import ConfigurationError, SectorError, StateError

logger = logging.getLogger(__name__)

SUPERPOSITION_PHOTONS = 2
DEFAULT_EMITTERS = (1, 7)


@dataclass(frozen=True)
class InitialStateSpec:
    """
    Recipe for the state the real-time evolution starts from.

    Attributes:
        kind: localized, superposition or custom.
        site: Reference cavity of a localized start.
        photons: Photons placed on `site` (localized only).
        phase: Relative phase phi of the |1,1> branch of the superposition, radians.
        sites: The two emitting cavities (a, b) of the superposition.
        amplitudes: Custom start as (occupation vector, amplitude) pairs; normalized on build.
    """

    kind: InitialStateKind = InitialStateKind.LOCALIZED
    site: int = 1
    photons: int = 2
    phase: float = 0.0
    sites: tuple[int, int] = DEFAULT_EMITTERS
    amplitudes: tuple[tuple[tuple[int, ...], complex], ...] = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'kind', InitialStateKind(self.kind))
        object.__setattr__(self, 'sites', tuple(int(site) for site in self.sites))
        if self.kind is InitialStateKind.LOCALIZED and self.photons < 0:
            raise ConfigurationError(f'photons must be >= 0, got {self.photons}')
        if self.kind is InitialStateKind.SUPERPOSITION:
            if len(self.sites) != 2 or self.sites[0] == self.sites[1]:
                raise ConfigurationError(f'A superposition needs two distinct emitting sites, got {self.sites}')
            if not np.isfinite(self.phase):
                raise ConfigurationError(f'phase must be finite, got {self.phase}')
        if self.kind is InitialStateKind.CUSTOM:
            if not self.amplitudes:
                raise ConfigurationError('A custom initial state needs at least one amplitude')
            totals = {sum(occupation) for occupation, _ in self.amplitudes}
            if len(totals) != 1:
                raise SectorError(f'Custom amplitudes span several photon numbers {sorted(totals)}')

    @classmethod
    def localized(cls, site: int = 1, photons: int = 2) -> 'InitialStateSpec':
        return cls(kind=InitialStateKind.LOCALIZED, site=site, photons=photons)

    @classmethod
    def superposition(cls, phase: float = 0.0, sites: Sequence[int] = DEFAULT_EMITTERS) -> 'InitialStateSpec':
        return cls(kind=InitialStateKind.SUPERPOSITION, phase=phase, sites=tuple(sites))

    @classmethod
    def custom(cls, amplitudes: Mapping[Sequence[int], complex]) -> 'InitialStateSpec':
        pairs = tuple((tuple(int(n) for n in occupation), complex(value)) for occupation, value in amplitudes.items())
        return cls(kind=InitialStateKind.CUSTOM, amplitudes=pairs)

    @property
    def n_total(self) -> int:
        """Photon number of the sector the state lives in."""
        if self.kind is InitialStateKind.LOCALIZED:
            return self.photons
        if self.kind is InitialStateKind.SUPERPOSITION:
            return SUPERPOSITION_PHOTONS
        return sum(self.amplitudes[0][0])

    def describe(self) -> dict[str, Any]:
        """Flat record for CSV metadata."""
        record: dict[str, Any] = {'kind': self.kind.value}
        if self.kind is InitialStateKind.LOCALIZED:
            record.update(site=self.site, photons=self.photons)
        elif self.kind is InitialStateKind.SUPERPOSITION:
            record.update(phase=self.phase, sites=list(self.sites))
        else:
            record['amplitudes'] = [[list(occupation), [value.real, value.imag]]
                                    for occupation, value in self.amplitudes]
        return record


def _occupation(basis: FockBasis, placement: Mapping[int, int]) -> tuple[int, ...]:
    vector = [0] * len(basis.sites)
    for site, photons in placement.items():
        if site not in basis.site_column:
            raise ConfigurationError(f'Site {site} is not part of the basis')
        vector[basis.site_column[site]] += photons
    return tuple(vector)


def build_initial_state(spec: InitialStateSpec, basis: FockBasis) -> np.ndarray:
    """
    Build the unit-norm start vector of an evolution in a fixed-N basis.

    The superposition is (|2_a> + |2_b> + e^{i phi} |1_a 1_b>) / sqrt(3) over the emitting pair (a, b).

    Args:
        spec (InitialStateSpec): What to prepare.
        basis (FockBasis): Fixed-N sector of the evolution.

    Returns:
        np.ndarray: Complex vector of length basis.dimension with norm 1.

    Raises:
        SectorError: If the requested state does not belong to the sector of `basis`.
        StateError: If custom amplitudes have zero norm.
    """
    if not basis.fixed_n:
        raise SectorError('Initial states are built in a fixed-N basis only')
    if spec.n_total != basis.n_total:
        raise SectorError(f'{spec.kind.value} start has N={spec.n_total}, basis has N={basis.n_total}')

    vector = np.zeros(basis.dimension, dtype=np.complex128)
    if spec.kind is InitialStateKind.LOCALIZED:
        vector[basis.lookup(_occupation(basis, {spec.site: spec.photons}))] = 1.0
        return vector

    if spec.kind is InitialStateKind.SUPERPOSITION:
        a, b = spec.sites
        weight = 1.0 / np.sqrt(3.0)
        vector[basis.lookup(_occupation(basis, {a: 2}))] = weight
        vector[basis.lookup(_occupation(basis, {b: 2}))] = weight
        vector[basis.lookup(_occupation(basis, {a: 1, b: 1}))] = np.exp(1j * spec.phase) * weight
        return vector

    for occupation, value in spec.amplitudes:
        if len(occupation) != len(basis.sites):
            raise SectorError(f'Occupation {occupation} has {len(occupation)} sites, basis has {len(basis.sites)}')
        vector[basis.lookup(occupation)] += value
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise StateError('Custom amplitudes have zero norm')
    if abs(norm - 1.0) > 1e-12:
        logger.info(f'Normalizing custom initial state with norm {norm:.6g}')
    return vector / norm
