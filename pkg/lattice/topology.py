"""
The 12-site kagome cell: six inner hexagon sites (even k) and six outer triangle tips (odd k).

The bond list below is the single replaceable constant table of the cell geometry. Every other package reads
sites, bonds and roles through `KagomeTopology` only.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Mapping

import numpy as np

from data.constants import N_SITES, SiteRole
from utils.data_helper import atomic_write_text
from utils.soft_assert import SoftAssertContextManager, Violation

logger = logging.getLogger(__name__)

Bond = tuple[int, int]

SITES: tuple[int, ...] = tuple(range(1, N_SITES + 1))
RING_BONDS: tuple[Bond, ...] = tuple(tuple(sorted((k, k % N_SITES + 1))) for k in SITES)
HEXAGON_BONDS: tuple[Bond, ...] = ((2, 4), (4, 6), (6, 8), (8, 10), (10, 12), (2, 12))
CELL_BONDS: tuple[Bond, ...] = RING_BONDS + HEXAGON_BONDS

INNER_RADIUS = 1.0
OUTER_RADIUS = float(np.sqrt(3.0))
EXPECTED_DEGREE = {SiteRole.INNER: 4, SiteRole.OUTER: 2}


def bond_key(u: int, v: int) -> Bond:
    """Return the canonical (ascending) form of an unordered site pair."""
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class KagomeTopology:
    """
    Immutable description of the cell graph.

    Attributes:
        sites: Ordered site identifiers 1..12.
        bonds: Unordered site pairs in canonical ascending form.
        role: Inner/outer classification per site.
        coordinates: 2D positions used for plot export only.
        rotation: The 6-fold symmetry map k -> k + 2 (mod 12).
        reflection: The mirror fixing sites 1 and 7.
    """

    sites: tuple[int, ...]
    bonds: tuple[Bond, ...]
    role: Mapping[int, SiteRole]
    coordinates: Mapping[int, tuple[float, float]] = field(compare=False)
    rotation: Mapping[int, int]
    reflection: Mapping[int, int]

    def __hash__(self) -> int:
        return hash((self.sites, self.bonds))

    @cached_property
    def bond_set(self) -> frozenset[Bond]:
        return frozenset(self.bonds)

    @cached_property
    def neighbors(self) -> dict[int, tuple[int, ...]]:
        table: dict[int, list[int]] = {site: [] for site in self.sites}
        for u, v in self.bonds:
            table.setdefault(u, []).append(v)
            table.setdefault(v, []).append(u)
        return {site: tuple(sorted(items)) for site, items in table.items()}

    @cached_property
    def adjacency(self) -> np.ndarray:
        index = {site: position for position, site in enumerate(self.sites)}
        matrix = np.zeros((len(self.sites), len(self.sites)))
        for u, v in self.bonds:
            matrix[index[u], index[v]] += 1.0
            matrix[index[v], index[u]] += 1.0
        return matrix

    @cached_property
    def triangles(self) -> tuple[tuple[int, int, int], ...]:
        found = []
        for a, b, c in combinations(self.sites, 3):
            if {bond_key(a, b), bond_key(b, c), bond_key(a, c)} <= self.bond_set:
                found.append((a, b, c))
        return tuple(found)

    @cached_property
    def inner_sites(self) -> tuple[int, ...]:
        return tuple(site for site in self.sites if self.role[site] is SiteRole.INNER)

    @cached_property
    def outer_sites(self) -> tuple[int, ...]:
        return tuple(site for site in self.sites if self.role[site] is SiteRole.OUTER)

    def degree(self, site: int) -> int:
        return len(self.neighbors.get(site, ()))

    def has_bond(self, u: int, v: int) -> bool:
        return bond_key(u, v) in self.bond_set

    def adjacency_max_eigenvalue(self) -> float:
        """Largest eigenvalue of the adjacency matrix (1 + sqrt(5) for the canonical cell)."""
        return float(np.linalg.eigvalsh(self.adjacency)[-1])

    def with_bonds(self, bonds) -> 'KagomeTopology':
        """Copy of the cell with a different bond list (used to exercise `validate`)."""
        return replace(self, bonds=tuple(bond_key(u, v) for u, v in bonds))


def _site_coordinates(site: int) -> tuple[float, float]:
    angle = np.deg2rad(90.0 - (site - 1) * 30.0)
    radius = INNER_RADIUS if site % 2 == 0 else OUTER_RADIUS
    return float(radius * np.cos(angle)), float(radius * np.sin(angle))


def build_unit_cell() -> KagomeTopology:
    """
    Build the fixed 12-site kagome star.

    Returns:
        KagomeTopology: Ring bonds (k, k mod 12 + 1) plus the inner hexagon chords, roles by parity,
        rotation k -> ((k + 1) mod 12) + 1 and reflection k -> ((13 - k) mod 12) + 1.
    """
    return KagomeTopology(
        sites=SITES,
        bonds=CELL_BONDS,
        role={site: SiteRole.INNER if site % 2 == 0 else SiteRole.OUTER for site in SITES},
        coordinates={site: _site_coordinates(site) for site in SITES},
        rotation={site: (site + 1) % N_SITES + 1 for site in SITES},
        reflection={site: (13 - site) % N_SITES + 1 for site in SITES},
    )


def _is_connected(topology: KagomeTopology) -> bool:
    if not topology.sites:
        return False
    seen = {topology.sites[0]}
    queue = deque(seen)
    while queue:
        for neighbor in topology.neighbors.get(queue.popleft(), ()):
            if neighbor not in seen:
                seen.add(neighbor)
                queue.append(neighbor)
    return seen == set(topology.sites)


def _check_symmetry(checker: SoftAssertContextManager, topology: KagomeTopology, name: str,
                    mapping: Mapping[int, int]) -> None:
    moved = [bond for bond in topology.bonds if bond_key(mapping[bond[0]], mapping[bond[1]]) not in topology.bond_set]
    checker.expect(not moved, f'{name}-maps-bonds', tuple(sorted({site for bond in moved for site in bond})),
                   f'{len(moved)} bonds leave the bond set')
    swapped = [site for site in topology.sites if topology.role[mapping[site]] is not topology.role[site]]
    checker.expect(not swapped, f'{name}-preserves-roles', tuple(swapped))


def validate(topology: KagomeTopology) -> list[Violation]:
    """
    Check every structural invariant of the cell.

    Args:
        topology (KagomeTopology): The cell to check.

    Returns:
        list[Violation]: Empty iff all invariants hold; each entry names the invariant and the offending sites.
    """
    checker = SoftAssertContextManager()
    sites = topology.sites

    checker.expect(len(sites) == N_SITES, 'site-count', detail=f'{len(sites)} sites')
    loops = [u for u, v in topology.bonds if u == v]
    checker.expect(not loops, 'no-self-loops', tuple(loops))
    duplicates = sorted({bond for bond in topology.bonds if topology.bonds.count(bond) > 1})
    checker.expect(not duplicates, 'no-duplicate-bonds', tuple(site for bond in duplicates for site in bond))

    inner = [site for site in sites if site % 2 == 0 and topology.role[site] is SiteRole.INNER]
    outer = [site for site in sites if site % 2 == 1 and topology.role[site] is SiteRole.OUTER]
    checker.expect(len(inner) == 6 and len(outer) == 6, 'roles-by-parity',
                   tuple(site for site in sites if site not in inner and site not in outer))

    wrong_degree = tuple(site for site in sites if topology.degree(site) != EXPECTED_DEGREE[topology.role[site]])
    checker.expect(not wrong_degree, 'degree', wrong_degree,
                   ', '.join(f'deg({site})={topology.degree(site)}' for site in wrong_degree))

    triangles = topology.triangles
    checker.expect(len(triangles) == 6, 'triangle-count', tuple(sorted({s for t in triangles for s in t})),
                   f'{len(triangles)} triangles')
    odd_shape = [t for t in triangles if sorted(topology.role[s] is SiteRole.OUTER for s in t) != [False, False, True]]
    checker.expect(not odd_shape, 'triangle-shape', tuple(s for t in odd_shape for s in t))

    open_corners = [o for o in topology.outer_sites
                    if len(topology.neighbors[o]) == 2 and not topology.has_bond(*topology.neighbors[o])]
    checker.expect(not open_corners, 'corner-sharing', tuple(open_corners))

    checker.expect(_is_connected(topology), 'connected')

    _check_symmetry(checker, topology, 'rotation', topology.rotation)
    _check_symmetry(checker, topology, 'reflection', topology.reflection)

    def power(mapping: Mapping[int, int], site: int, times: int) -> int:
        for _ in range(times):
            site = mapping[site]
        return site

    not_cyclic = tuple(site for site in sites if power(topology.rotation, site, 6) != site)
    checker.expect(not not_cyclic, 'rotation-order-6', not_cyclic)
    checker.expect(power(topology.rotation, 1, 3) == 7, 'rotation-antipode', (1, 7))

    if checker.has_failures():
        logger.warning(f'Topology validation found {len(checker.failures)} violations')
    return checker.get_failures()


def export_edge_list(topology: KagomeTopology, path: str | Path) -> Path:
    """
    Write the bond list as plain text, one "k k'" pair per line, in canonical order.
    """
    text = ''.join(f'{u} {v}\n' for u, v in topology.bonds)
    written = atomic_write_text(path, text)
    logger.info(f'Edge list with {len(topology.bonds)} bonds written to {written}')
    return written
