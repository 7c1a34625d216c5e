"""
Leg and group layout of the kagome PEPS.

Every tensor has shape (d, ring_prev, ring_next, chord_prev, chord_next). Outer tips have no chords, so their
chord legs are dangling with dimension 1. Each inner site s absorbs its clockwise outer tip s + 1 into one group;
the six groups form a ring s -> s + 2.
"""

from data.constants import N_SITES
from lattice.topology import CELL_BONDS, HEXAGON_BONDS, Bond, KagomeTopology, bond_key
from utils.errors import ConfigurationError

LEG_NAMES = ('ring_prev', 'ring_next', 'chord_prev', 'chord_next')
GROUPS: tuple[int, ...] = (2, 4, 6, 8, 10, 12)
# clockwise first, then counterclockwise
SWEEP_ORDER: tuple[int, ...] = tuple(range(1, N_SITES + 1)) + tuple(range(N_SITES, 0, -1))


def _wrap(site: int) -> int:
    return (site - 1) % N_SITES + 1


def group_outer(head: int) -> int:
    """Outer tip absorbed by the group whose inner site is `head`."""
    return _wrap(head + 1)


def group_of(site: int) -> int:
    """Inner site heading the group that contains `site`."""
    return site if site % 2 == 0 else _wrap(site - 1)


def chain_order(head: int) -> tuple[int, ...]:
    """The five other groups in ring order, starting right after `head`."""
    start = GROUPS.index(head)
    return tuple(GROUPS[(start + step) % len(GROUPS)] for step in range(1, len(GROUPS)))


def previous_group(head: int) -> int:
    return GROUPS[(GROUPS.index(head) - 1) % len(GROUPS)]


def site_legs(site: int) -> tuple[Bond | None, Bond | None, Bond | None, Bond | None]:
    """Bond carried by each virtual leg of `site`, None for dangling legs."""
    ring = (bond_key(_wrap(site - 1), site), bond_key(site, _wrap(site + 1)))
    if site % 2 == 1:
        return ring[0], ring[1], None, None
    return ring[0], ring[1], bond_key(_wrap(site - 2), site), bond_key(site, _wrap(site + 2))


def is_chord(bond: Bond) -> bool:
    return bond in HEXAGON_BONDS


def require_canonical(topology: KagomeTopology) -> None:
    """The PEPS layout is tied to the canonical cell; any other bond set is rejected."""
    if topology.bond_set != frozenset(CELL_BONDS) or tuple(topology.sites) != tuple(range(1, N_SITES + 1)):
        raise ConfigurationError('The PEPS engine requires the canonical 12-site kagome cell')
