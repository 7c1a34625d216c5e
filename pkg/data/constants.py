from enum import Enum


class SiteRole(Enum):
    INNER = 'inner'
    OUTER = 'outer'


class ExperimentKind(Enum):
    ED_SPECTRUM = 'ed-spectrum'
    PEPS_OPTIMIZE = 'peps-optimize'
    BENCHMARK = 'benchmark'
    DYNAMICS = 'dynamics'
    DISORDER_DYNAMICS = 'disorder-dynamics'
    DISORDER_ENERGY = 'disorder-energy'
    MU_SCAN = 'mu-scan'
    TOPOLOGY_EXPORT = 'topology-export'


class InitialStateKind(Enum):
    LOCALIZED = 'localized'
    SUPERPOSITION = 'superposition'
    CUSTOM = 'custom'


class ScanAxis(Enum):
    MU = 'mu'
    KAPPA = 'kappa'


class DisorderDistribution(Enum):
    UNIFORM = 'uniform'


class Units(Enum):
    DIMENSIONLESS = 'dimensionless'
    SI = 'si'


class ExitCode(Enum):
    SUCCESS = 0
    PARSE_ERROR = 2
    VALIDATION_ERROR = 3
    CAPACITY_ERROR = 4
    NUMERICAL_ERROR = 5


# Reduced Planck constant, J*s (exact SI value)
HBAR = 1.054571817e-34
# Reference frequency Omega_R, rad/s
DEFAULT_UNIT_SCALE = 1.0e7

N_SITES = 12
MAX_ED_PHOTONS = 8
MAX_STATEVECTOR_PHYS_DIM = 3
MAX_PEPS_LOCAL_DIM = 4096

DEFAULT_REGULARIZATION_EPS = 1e-10
DEFAULT_CONVERGENCE_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 200
DEFAULT_FIRST_PEAK_FLOOR = 1e-6

OUTPUT_ROOT_ENV = 'KAGOME_OUTPUT_ROOT'
LOG_LEVEL_ENV = 'KAGOME_LOG_LEVEL'
DEFAULT_OUTPUT_ROOT = 'results'
