import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from data.constants import (DEFAULT_CONVERGENCE_TOL, DEFAULT_MAX_SWEEPS, DEFAULT_REGULARIZATION_EPS,
                            MAX_PEPS_LOCAL_DIM)
from lattice.topology import Bond, KagomeTopology, bond_key
from peps.contraction import contract_scalar
from peps.layout import LEG_NAMES, is_chord, require_canonical, site_legs
from utils.errors import CapacityError, ConfigurationError, ContractionError, NumericalError
from utils.randomizer import make_rng, uniform_complex

logger = logging.getLogger(__name__)

MAX_INIT_ATTEMPTS = 10


@dataclass(frozen=True)
class PepsConfig:
    """
    Settings of one variational PEPS run.

    Attributes:
        n_total: Target photon number N.
        phys_dim: Local dimension d = N + 1 (filled in when omitted).
        bond_dims: Optional per-bond override of the virtual dimensions.
        bond_cap: Maximum virtual dimension D, at most d^2 (None means uncapped, D = d^2).
        seed: Seed of the initialization stream.
        convergence_tol: |Delta E| per full sweep, in units of hbar * Omega_R.
        max_sweeps: Sweep budget.
        regularization_eps: Relative cutoff on the eigenvalues of N_eff.
        number_penalty: Weight of lambda (N - n_total)^2 in hbar * Omega_R; None picks a safe default,
            0 runs purely grand-canonically.
    """

    n_total: int
    phys_dim: int | None = None
    bond_dims: Mapping[Bond, int] | None = None
    bond_cap: int | None = None
    seed: int = 0
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    regularization_eps: float = DEFAULT_REGULARIZATION_EPS
    number_penalty: float | None = None

    def __post_init__(self):
        if self.n_total < 0:
            raise ConfigurationError(f'n_total must be >= 0, got {self.n_total}')
        expected = self.n_total + 1
        if self.phys_dim is None:
            object.__setattr__(self, 'phys_dim', expected)
        elif self.phys_dim != expected:
            raise ConfigurationError(f'phys_dim must equal n_total + 1 = {expected}, got {self.phys_dim}')
        if self.bond_cap is not None and not 1 <= self.bond_cap <= expected ** 2:
            raise ConfigurationError(f'bond_cap must lie in 1..d^2 = {expected ** 2}, got {self.bond_cap}')
        if self.bond_dims is not None:
            dims = {bond_key(*bond): int(dim) for bond, dim in self.bond_dims.items()}
            bad = {bond: dim for bond, dim in dims.items() if not 1 <= dim <= self.max_bond_dim}
            if bad:
                raise ConfigurationError(f'Bond dimensions outside 1..{self.max_bond_dim}: {bad}')
            object.__setattr__(self, 'bond_dims', dims)
        if self.seed < 0:
            raise ConfigurationError(f'seed must be >= 0, got {self.seed}')
        if not self.convergence_tol > 0:
            raise ConfigurationError(f'convergence_tol must be > 0, got {self.convergence_tol}')
        if not 0 < self.regularization_eps < 1:
            raise ConfigurationError(f'regularization_eps must lie in (0, 1), got {self.regularization_eps}')
        if self.max_sweeps < 1:
            raise ConfigurationError(f'max_sweeps must be >= 1, got {self.max_sweeps}')
        if self.number_penalty is not None and not self.number_penalty >= 0:
            raise ConfigurationError(f'number_penalty must be >= 0, got {self.number_penalty}')

    @property
    def max_bond_dim(self) -> int:
        """D: the cap if one is set, d^2 otherwise."""
        return self.bond_cap if self.bond_cap is not None else self.phys_dim ** 2

    def resolved_bond_dims(self, topology: KagomeTopology) -> dict[Bond, int]:
        """Ring bonds get min(d, D), inner-hexagon chords get D, overrides win."""
        dims = {bond: self.max_bond_dim if is_chord(bond) else min(self.phys_dim, self.max_bond_dim)
                for bond in topology.bonds}
        dims.update(self.bond_dims or {})
        return dims


@dataclass
class PepsTensor:
    """One rank-5 site tensor with its leg-to-bond assignment."""

    site: int
    data: np.ndarray = field(repr=False)
    legs: tuple[Bond | None, ...]

    @property
    def local_dimension(self) -> int:
        return int(self.data.size)


def tensor_shape(site: int, phys_dim: int, bond_dims: Mapping[Bond, int]) -> tuple[int, ...]:
    return (phys_dim, *(1 if bond is None else bond_dims[bond] for bond in site_legs(site)))


@dataclass
class PepsState:
    """
    The kagome PEPS: twelve site tensors, their bond dimensions and the owning configuration.

    `versions` counts updates per site so environment caches can tell stale data apart.
    """

    tensors: dict[int, PepsTensor]
    topology: KagomeTopology
    config: PepsConfig
    bond_dims: dict[Bond, int]
    versions: dict[int, int] = field(default_factory=dict)

    @property
    def phys_dim(self) -> int:
        return self.config.phys_dim

    def array(self, site: int) -> np.ndarray:
        return self.tensors[site].data

    def set_array(self, site: int, data: np.ndarray) -> None:
        expected = self.tensors[site].data.shape
        if data.shape != expected:
            raise ContractionError(f'Tensor for site {site} has shape {data.shape}, expected {expected}')
        self.tensors[site].data = np.ascontiguousarray(data, dtype=np.complex128)
        self.versions[site] = self.versions.get(site, 0) + 1

    def copy(self) -> 'PepsState':
        tensors = {site: PepsTensor(site, tensor.data.copy(), tensor.legs) for site, tensor in self.tensors.items()}
        return PepsState(tensors, self.topology, self.config, dict(self.bond_dims), dict(self.versions))

    def check_bonds(self) -> None:
        """
        Raise ContractionError naming the first bond whose two legs disagree in dimension.
        """
        for site, tensor in self.tensors.items():
            if tensor.data.shape[0] != self.phys_dim:
                raise ContractionError(f'Site {site} has physical dimension {tensor.data.shape[0]}, '
                                       f'expected {self.phys_dim}')
            for leg, (name, bond) in enumerate(zip(LEG_NAMES, tensor.legs), start=1):
                size = tensor.data.shape[leg]
                if bond is None:
                    if size != 1:
                        raise ContractionError(f'Dangling leg {name} of site {site} has dimension {size}')
                    continue
                other = bond[1] if bond[0] == site else bond[0]
                other_size = self.tensors[other].data.shape[1 + self.tensors[other].legs.index(bond)]
                if size != other_size:
                    raise ContractionError(f'Bond {bond} has dimension {size} at site {site} '
                                           f'but {other_size} at site {other}', bond=bond)

    def norm(self) -> float:
        return float(contract_scalar(self, self).real)


def empty_state(config: PepsConfig, topology: KagomeTopology) -> PepsState:
    require_canonical(topology)
    dims = config.resolved_bond_dims(topology)
    tensors = {}
    for site in topology.sites:
        shape = tensor_shape(site, config.phys_dim, dims)
        if int(np.prod(shape)) > MAX_PEPS_LOCAL_DIM:
            raise CapacityError(f'Site {site} tensor of shape {shape} exceeds the local dimension guard '
                                f'{MAX_PEPS_LOCAL_DIM}; lower bond_cap')
        tensors[site] = PepsTensor(site, np.zeros(shape, dtype=np.complex128), site_legs(site))
    return PepsState(tensors, topology, config, dims, {site: 0 for site in topology.sites})


def normalize(state: PepsState) -> float:
    """
    Rescale every tensor by the same factor so that <Psi|Psi> = 1; returns the norm before scaling.
    """
    norm = state.norm()
    if not np.isfinite(norm) or norm <= 0.0:
        raise NumericalError(f'Cannot normalize a PEPS with norm {norm}')
    factor = norm ** (-1.0 / (2 * len(state.tensors)))
    for site in state.tensors:
        state.set_array(site, state.array(site) * factor)
    return norm


def randomize_site(state: PepsState, site: int, seed: int, *stream: int) -> None:
    """Refill one tensor with fresh uniform complex entries from the stream (seed, *stream)."""
    rng = make_rng(seed, *stream)
    state.set_array(site, uniform_complex(rng, state.array(site).shape))


def init_random(config: PepsConfig, topology: KagomeTopology) -> PepsState:
    """
    Draw a random PEPS: real then imaginary parts uniform on [-1, 1], sites in ascending order, one seeded stream.

    Args:
        config (PepsConfig): Dimensions and seed.
        topology (KagomeTopology): The canonical cell.

    Returns:
        PepsState: Normalized so that <Psi|Psi> = 1.

    Raises:
        NumericalError: If every retry produced a zero-norm state.
    """
    state = empty_state(config, topology)
    for attempt in range(MAX_INIT_ATTEMPTS):
        rng = make_rng(config.seed + attempt)
        for site in topology.sites:
            state.set_array(site, uniform_complex(rng, state.array(site).shape))
        norm = state.norm()
        if np.isfinite(norm) and norm > 0.0:
            normalize(state)
            return state
        logger.warning(f'Random PEPS with seed {config.seed + attempt} has norm {norm}, retrying with the next seed')
    raise NumericalError(f'No usable random PEPS after {MAX_INIT_ATTEMPTS} seeds starting at {config.seed}')


def product_state(config: PepsConfig, topology: KagomeTopology, occupations: Mapping[int, int]) -> PepsState:
    """
    PEPS with every virtual dimension 1 and site k in the Fock state |n_k>.
    """
    flat = PepsConfig(n_total=config.n_total, bond_dims={bond: 1 for bond in topology.bonds},
                      seed=config.seed, number_penalty=config.number_penalty)
    state = empty_state(flat, topology)
    for site in topology.sites:
        data = np.zeros(state.array(site).shape, dtype=np.complex128)
        data[occupations.get(site, 0), 0, 0, 0, 0] = 1.0
        state.set_array(site, data)
    return state


def apply_bond_gauge(state: PepsState, bond: Bond, gauge: np.ndarray) -> PepsState:
    """
    Insert X on one end of a bond and X^-1 on the other; the physical state is unchanged.

    Args:
        state (PepsState): Source state, left untouched.
        bond (Bond): The bond (u, v) with u < v; X acts on u's leg, X^-1 on v's leg.
        gauge (np.ndarray): Invertible (D, D) matrix.

    Returns:
        PepsState: A gauge-transformed copy.
    """
    u, v = bond_key(*bond)
    if bond_key(u, v) not in state.bond_dims:
        raise ConfigurationError(f'{bond} is not a bond of the cell')
    inverse = np.linalg.inv(gauge)
    gauged = state.copy()
    for site, matrix in ((u, gauge), (v, inverse.T)):
        axis = 1 + state.tensors[site].legs.index((u, v))
        moved = np.tensordot(state.array(site), matrix, axes=([axis], [0]))
        gauged.set_array(site, np.moveaxis(moved, -1, axis))
    return gauged


def shift_gauge(state: PepsState, site: int, target: int) -> bool:
    """
    Turn `site` into an isometry over its leg towards `target` and absorb the triangular factor into `target`.

    Uses A = QR on the tensor reshaped to (other legs, shared leg); Q replaces A and R is contracted into the
    neighbour, so the physical state is unchanged while the gauge freedom on that bond moves forward.

    Args:
        state (PepsState): Updated in place.
        site (int): Tensor to make isometric.
        target (int): Neighbour sharing a bond with `site`.

    Returns:
        bool: False when the shared leg is wider than the rest of the tensor and nothing was moved.
    """
    bond = bond_key(site, target)
    if bond not in state.bond_dims:
        raise ConfigurationError(f'Sites {site} and {target} share no bond')
    axis = 1 + state.tensors[site].legs.index(bond)
    moved = np.moveaxis(state.array(site), axis, -1)
    width = moved.shape[-1]
    matrix = moved.reshape(-1, width)
    if matrix.shape[0] < width:
        return False
    isometry, upper = np.linalg.qr(matrix)
    state.set_array(site, np.moveaxis(isometry.reshape(moved.shape), -1, axis))
    target_axis = 1 + state.tensors[target].legs.index(bond)
    absorbed = np.tensordot(upper, state.array(target), axes=([1], [target_axis]))
    state.set_array(target, np.moveaxis(absorbed, 0, target_axis))
    return True
