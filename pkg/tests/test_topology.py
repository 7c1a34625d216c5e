import numpy as np
import pytest

from data.constants import SiteRole
from lattice.topology import CELL_BONDS, HEXAGON_BONDS, export_edge_list, validate


class TestUnitCell:

    def test_canonical_cell_is_valid(self, topology):
        assert validate(topology) == []

    def test_counts_and_degrees(self, topology, soft_assert):
        soft_assert.expect(len(topology.sites) == 12, 'site-count')
        soft_assert.expect(len(topology.bonds) == 18, 'bond-count')
        for site in topology.sites:
            expected = 4 if site % 2 == 0 else 2
            soft_assert.expect(topology.degree(site) == expected, 'degree', (site,))
            role = SiteRole.INNER if site % 2 == 0 else SiteRole.OUTER
            soft_assert.expect(topology.role[site] is role, 'role', (site,))

    def test_six_corner_sharing_triangles(self, topology):
        triangles = topology.triangles
        assert len(triangles) == 6
        for triangle in triangles:
            outer = [site for site in triangle if site % 2 == 1]
            assert len(outer) == 1
        shared = {site for site in topology.inner_sites
                  if sum(site in triangle for triangle in triangles) == 2}
        assert shared == set(topology.inner_sites)

    def test_adjacency_top_eigenvalue(self, topology):
        assert topology.adjacency_max_eigenvalue() == pytest.approx(1 + np.sqrt(5), rel=1e-12)

    def test_rotation_and_reflection(self, topology):
        assert topology.rotation[1] == 3 and topology.rotation[12] == 2
        assert topology.reflection[1] == 1 and topology.reflection[7] == 7
        assert topology.reflection[2] == 12 and topology.reflection[6] == 8
        for u, v in topology.bonds:
            assert topology.has_bond(topology.rotation[u], topology.rotation[v])
            assert topology.has_bond(topology.reflection[u], topology.reflection[v])

    def test_neighbors_are_symmetric(self, topology):
        for site, neighbors in topology.neighbors.items():
            for other in neighbors:
                assert site in topology.neighbors[other]


class TestValidate:

    def test_missing_chord_breaks_degree_and_symmetry(self, topology):
        broken = topology.with_bonds([bond for bond in CELL_BONDS if bond != HEXAGON_BONDS[0]])
        invariants = {violation.invariant for violation in validate(broken)}
        assert 'degree' in invariants
        assert 'rotation-maps-bonds' in invariants
        degree = next(violation for violation in validate(broken) if violation.invariant == 'degree')
        assert set(degree.sites) == set(HEXAGON_BONDS[0])

    def test_self_loop_and_duplicate(self, topology):
        broken = topology.with_bonds([*CELL_BONDS, (3, 3), CELL_BONDS[0]])
        invariants = {violation.invariant for violation in validate(broken)}
        assert {'no-self-loops', 'no-duplicate-bonds'} <= invariants

    def test_extra_bond_breaks_degree(self, topology):
        broken = topology.with_bonds([*CELL_BONDS, (1, 7)])
        invariants = {violation.invariant for violation in validate(broken)}
        assert 'degree' in invariants


def test_export_edge_list(topology, tmp_path):
    path = export_edge_list(topology, tmp_path / 'edges.txt')
    lines = path.read_text(encoding='utf-8').splitlines()
    assert len(lines) == 18
    pairs = [tuple(int(part) for part in line.split()) for line in lines]
    assert pairs == list(topology.bonds)
    assert all(u < v for u, v in pairs)
