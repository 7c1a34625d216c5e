from peps.checkpoint import load_checkpoint, save_checkpoint
from peps.contraction import contract_scalar, group_transfer
from peps.effective import (EnvironmentCache, LocalEigProblem, build_effective_pair, hamiltonian_for, number_moments,
                            peps_energy)
from peps.gevp import solve_local_gevp
from peps.layout import GROUPS, SWEEP_ORDER, site_legs
from peps.observables import PepsReadouts, peps_local_occupations, peps_readouts
from peps.operators import PepsHamiltonian, local_operators
from peps.state import (PepsConfig, PepsState, PepsTensor, apply_bond_gauge, init_random, normalize, product_state,
                        randomize_site, shift_gauge)
from peps.statevector import peps_to_statevector, project_to_sector, statevector_energy
from peps.sweep import OptimizationTrace, SweepRecord, full_sweep, optimize, trace_frame
