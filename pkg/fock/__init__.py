from fock.basis import FockBasis, basis_dimension, enumerate_basis, enumerate_truncated_basis
from fock.hamiltonian import (HermitianOperator, build_hamiltonian, hopping_operator, number_operator,
                              site_number_operator)
from fock.params import HamiltonianParams
from fock.spectrum import (Eigenpair, ed_spectrum, ground_state, local_occupations, occupations_frame,
                           sector_ground_energy, spectrum_frame, uniform_ground_energy)
