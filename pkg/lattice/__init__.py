from lattice.topology import (CELL_BONDS, HEXAGON_BONDS, RING_BONDS, SITES, Bond, KagomeTopology, bond_key,
                              build_unit_cell, export_edge_list, validate)
