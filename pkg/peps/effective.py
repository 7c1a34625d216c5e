"""
Effective Hamiltonian and normalization of one site.

The rest of the ring (five groups) is folded into a handful of environment matrices that track the identity string
P, the accumulated Hamiltonian Q, the number moments S1 = N_out and S2 = N_out^2, and the hopping terms still
waiting for a partner operator. Chord channels 0/1 carry a^dag/a on the inner site of the opening group; ring
channels 2/3 carry a^dag/a on its outer tip. All close on the next inner site.

Any run of consecutive groups folds into the same set of matrices, and two adjacent runs join with a fixed number
of products, so runs left unchanged by the last updates are kept and reused by the next chains.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from fock.params import HamiltonianParams
from peps.contraction import (group_transfer, inner_environment, inner_norm_block, outer_environment,
                              outer_norm_block)
from peps.layout import GROUPS, chain_order, group_of, group_outer, previous_group
from peps.operators import PepsHamiltonian, local_operators
from peps.state import PepsState

logger = logging.getLogger(__name__)

# (op on inner, op on outer) opening each channel; each closes with the adjoint operator on the next inner site
OPEN_CHANNELS = (('ad', 'I'), ('a', 'I'), ('I', 'ad'), ('I', 'a'))
# folded runs of two to five groups kept between chains
MAX_CACHED_RUNS = 8


@dataclass
class LocalEigProblem:
    """
    The pair (H_eff, N_eff) of one site and, once solved, its regularized generalized eigen-solution.

    Attributes:
        norm_block: Virtual block M with N_eff = I_d (x) M, when the pair comes from a PEPS.
        current: The site's tensor when the pair was built, flattened.
    """

    site: int
    h_eff: np.ndarray = field(repr=False)
    n_eff: np.ndarray = field(repr=False)
    norm_block: np.ndarray | None = field(default=None, repr=False)
    current: np.ndarray | None = field(default=None, repr=False)
    xi: float | None = None
    vector: np.ndarray | None = field(default=None, repr=False)
    deviation: float | None = None
    dropped_directions: int = 0
    condition_number: float | None = None

    @property
    def dimension(self) -> int:
        return int(self.h_eff.shape[0])

    @property
    def regularized(self) -> bool:
        return self.dropped_directions > 0

    def quotient(self, vector: np.ndarray) -> float:
        """A^dag H_eff A / A^dag N_eff A."""
        return float(np.vdot(vector, self.h_eff @ vector).real / np.vdot(vector, self.n_eff @ vector).real)


@dataclass
class ChainEnvironment:
    """
    Folded run of consecutive groups, all matrices shaped (left interface, right interface) of the run.

    Attributes:
        groups: Inner sites heading the folded groups, in ring order.
        right_open: a / a^dag on the first inner site, waiting for a partner from the group before the run.
        left_open: The four channels opened in the last group, waiting for the group after the run.
    """

    groups: tuple[int, ...]
    identity: np.ndarray
    hamiltonian: np.ndarray
    moment1: np.ndarray | None
    moment2: np.ndarray | None
    right_open: dict[str, np.ndarray]
    left_open: list[np.ndarray]


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().T) / 2


class EnvironmentCache:
    """
    Builds chain environments for one state and reuses folded runs of groups whose tensors are unchanged.

    Runs are keyed by their groups and the tensor versions they were built from; stale runs are dropped on every
    store and at most MAX_CACHED_RUNS are kept.
    """

    def __init__(self, state: PepsState, hamiltonian: PepsHamiltonian):
        self.state = state
        self.hamiltonian = hamiltonian
        self.ops = local_operators(state.phys_dim)
        self._plain: dict[int, tuple[tuple[int, int], np.ndarray]] = {}
        self._runs: OrderedDict[tuple[int, ...], tuple[tuple, ChainEnvironment]] = OrderedDict()
        self._last_head: int | None = None
        self._forward = True

    def _group_version(self, head: int) -> tuple[int, int]:
        return self.state.versions.get(head, 0), self.state.versions.get(group_outer(head), 0)

    def _run_versions(self, groups: tuple[int, ...]) -> tuple:
        return tuple(self._group_version(group) for group in groups)

    def transfer(self, head: int, op_inner: str = 'I', op_outer: str = 'I') -> np.ndarray:
        """Transfer matrix of a group with named operators on its inner and outer site."""
        plain = op_inner == 'I' and op_outer == 'I'
        version = self._group_version(head)
        if plain and head in self._plain and self._plain[head][0] == version:
            return self._plain[head][1]
        tip = group_outer(head)
        ket_inner, ket_outer = self.state.array(head), self.state.array(tip)
        matrix = group_transfer(ket_inner, ket_outer, ket_inner, ket_outer,
                                None if op_inner == 'I' else self.ops[op_inner],
                                None if op_outer == 'I' else self.ops[op_outer])
        if plain:
            self._plain[head] = (version, matrix)
        return matrix

    def number_transfer(self, head: int) -> np.ndarray:
        return self.transfer(head, 'n', 'I') + self.transfer(head, 'I', 'n')

    def number_squared_transfer(self, head: int) -> np.ndarray:
        return self.transfer(head, 'n2', 'I') + 2.0 * self.transfer(head, 'n', 'n') + self.transfer(head, 'I', 'n2')

    def local_transfer(self, head: int, number: np.ndarray) -> np.ndarray:
        """Linear on-site part plus the hopping inside the group."""
        kappa = self.hamiltonian.coupling(head, group_outer(head))
        matrix = self.hamiltonian.linear * number
        if kappa:
            matrix = matrix - kappa * (self.transfer(head, 'ad', 'a') + self.transfer(head, 'a', 'ad'))
        return matrix

    def boundary_couplings(self, head: int) -> tuple[float, float, float, float]:
        """Couplings of the four channels crossing from the previous group into `head`."""
        previous = previous_group(head)
        chord = self.hamiltonian.coupling(previous, head)
        ring = self.hamiltonian.coupling(group_outer(previous), head)
        return chord, chord, ring, ring

    def chain(self, head: int) -> ChainEnvironment:
        """
        Fold the five groups after `head` (in ring order) into environment matrices.
        """
        order = chain_order(head)
        # a clockwise sweep changes the first group of the next chain, a counterclockwise one the last
        self._forward = self._last_head is None or head != previous_group(self._last_head)
        self._last_head = head
        return self._fold(order)

    def _fold(self, groups: tuple[int, ...]) -> ChainEnvironment:
        if len(groups) == 1:
            return self._single(groups[0])
        cached = self._cached(groups)
        if cached is not None:
            return cached
        split = self._split(groups)
        run = self._join(self._fold(groups[:split]), self._fold(groups[split:]))
        self._store(run)
        return run

    def _cached(self, groups: tuple[int, ...]) -> ChainEnvironment | None:
        entry = self._runs.get(groups)
        if entry is None or entry[0] != self._run_versions(groups):
            return None
        self._runs.move_to_end(groups)
        return entry[1]

    def _split(self, groups: tuple[int, ...]) -> int:
        """Cut that reuses the longest cached runs; ties fold away from the group the sweep changes next."""
        def reused(cut: int) -> int:
            parts = (groups[:cut], groups[cut:])
            return sum(len(part) for part in parts if len(part) > 1 and self._cached(part) is not None)

        cuts = range(1, len(groups)) if self._forward else range(len(groups) - 1, 0, -1)
        return max(cuts, key=reused)

    def _store(self, run: ChainEnvironment) -> None:
        stale = [groups for groups, (versions, _) in self._runs.items() if versions != self._run_versions(groups)]
        for groups in stale:
            del self._runs[groups]
        self._runs[run.groups] = (self._run_versions(run.groups), run)
        while len(self._runs) > MAX_CACHED_RUNS:
            self._runs.popitem(last=False)

    def _single(self, head: int) -> ChainEnvironment:
        with_moments = self.hamiltonian.penalty != 0.0
        number = self.number_transfer(head)
        opens = self._open_transfers(head)
        return ChainEnvironment(
            groups=(head,),
            identity=self.transfer(head),
            hamiltonian=self.local_transfer(head, number),
            moment1=number if with_moments else None,
            moment2=self.number_squared_transfer(head) if with_moments else None,
            right_open={'a': opens[1], 'ad': opens[0]},
            left_open=opens,
        )

    def _join(self, left: ChainEnvironment, right: ChainEnvironment) -> ChainEnvironment:
        couplings = self.boundary_couplings(right.groups[0])
        channels = left.left_open
        closing = -(couplings[0] * channels[0] + couplings[2] * channels[2])
        closing_dag = -(couplings[1] * channels[1] + couplings[3] * channels[3])
        hamiltonian = (left.hamiltonian @ right.identity + left.identity @ right.hamiltonian
                       + closing @ right.right_open['a'] + closing_dag @ right.right_open['ad'])
        moment1 = moment2 = None
        if left.moment1 is not None:
            moment1 = left.moment1 @ right.identity + left.identity @ right.moment1
            moment2 = (left.moment2 @ right.identity + 2.0 * left.moment1 @ right.moment1
                       + left.identity @ right.moment2)
        return ChainEnvironment(
            groups=left.groups + right.groups,
            identity=left.identity @ right.identity,
            hamiltonian=hamiltonian,
            moment1=moment1,
            moment2=moment2,
            right_open={key: matrix @ right.identity for key, matrix in left.right_open.items()},
            left_open=[left.identity @ matrix for matrix in right.left_open],
        )

    def _open_transfers(self, head: int) -> list[np.ndarray]:
        return [self.transfer(head, op_inner, op_outer) for op_inner, op_outer in OPEN_CHANNELS]

def environment_terms(cache: EnvironmentCache, head: int) -> dict[tuple[str, str], np.ndarray]:
    """
    Environment matrix per (inner operator, outer operator) pair acting on the group `head`.
    """
    ham = cache.hamiltonian
    chain = cache.chain(head)
    tip = group_outer(head)
    terms: dict[tuple[str, str], np.ndarray] = {}

    def add(key: tuple[str, str], matrix: np.ndarray) -> None:
        terms[key] = terms[key] + matrix if key in terms else matrix

    outside = chain.hamiltonian + ham.constant * chain.identity
    linear = ham.linear * chain.identity
    if ham.penalty != 0.0:
        outside = outside + ham.penalty * chain.moment2
        linear = linear + 2.0 * ham.penalty * chain.moment1
    add(('I', 'I'), outside)
    add(('n', 'I'), linear)
    add(('I', 'n'), linear)
    if ham.penalty != 0.0:
        add(('n2', 'I'), ham.penalty * chain.identity)
        add(('I', 'n2'), ham.penalty * chain.identity)
        add(('n', 'n'), 2.0 * ham.penalty * chain.identity)

    inside = ham.coupling(head, tip)
    if inside:
        add(('ad', 'a'), -inside * chain.identity)
        add(('a', 'ad'), -inside * chain.identity)

    following = chain_order(head)[0]
    chord_right = ham.coupling(head, following)
    ring_right = ham.coupling(tip, following)
    # operators opened here, closed by a / a^dag on the next inner site
    add(('ad', 'I'), -chord_right * chain.right_open['a'])
    add(('a', 'I'), -chord_right * chain.right_open['ad'])
    add(('I', 'ad'), -ring_right * chain.right_open['a'])
    add(('I', 'a'), -ring_right * chain.right_open['ad'])

    chord_left, _, ring_left, _ = cache.boundary_couplings(head)
    left = chain.left_open
    add(('a', 'I'), -chord_left * left[0] - ring_left * left[2])
    add(('ad', 'I'), -chord_left * left[1] - ring_left * left[3])
    return terms


def build_effective_pair(state: PepsState, params: HamiltonianParams, k: int,
                         cache: EnvironmentCache | None = None) -> LocalEigProblem:
    """
    Assemble H_eff and N_eff of site k so that A^dag H_eff A = <Psi|F|Psi> and A^dag N_eff A = <Psi|Psi>.

    Args:
        state (PepsState): Current state; tensor k plays the role of A.
        params (HamiltonianParams): Physical parameters (converted to hbar * Omega_R units).
        k (int): Site to isolate.
        cache (EnvironmentCache | None): Reusable environment cache bound to `state`.

    Returns:
        LocalEigProblem: Hermitized (H_eff, N_eff) pair with N_eff = I_d (x) M and the current tensor.
    """
    if cache is None:
        cache = EnvironmentCache(state, hamiltonian_for(state, params))
    head = group_of(k)
    tip = group_outer(head)
    ops = cache.ops
    shape = state.array(k).shape

    def local(env: np.ndarray, op_inner: str, op_outer: str) -> np.ndarray:
        if k == head:
            return inner_environment(env, shape, state.array(tip), state.array(tip), ops[op_inner], ops[op_outer])
        return outer_environment(env, shape, state.array(head), state.array(head), ops[op_inner], ops[op_outer])

    terms = environment_terms(cache, head)
    h_eff = sum(local(env, op_inner, op_outer) for (op_inner, op_outer), env in terms.items())
    identity = cache.chain(head).identity
    if k == head:
        block = inner_norm_block(identity, shape, state.array(tip), state.array(tip))
    else:
        block = outer_norm_block(identity, shape, state.array(head), state.array(head))
    block = _hermitize(block)
    n_eff = np.kron(np.eye(state.phys_dim), block)
    return LocalEigProblem(site=k, h_eff=_hermitize(h_eff), n_eff=n_eff, norm_block=block,
                           current=state.array(k).ravel().copy())


def hamiltonian_for(state: PepsState, params: HamiltonianParams) -> PepsHamiltonian:
    return PepsHamiltonian.from_params(params, state.config.n_total, state.config.number_penalty, state.topology)


def peps_energy(state: PepsState, params: HamiltonianParams, cache: EnvironmentCache | None = None) -> float:
    """
    Value of the variational functional <Psi|F|Psi> / <Psi|Psi> in units of hbar * Omega_R.
    """
    problem = build_effective_pair(state, params, 1, cache)
    return problem.quotient(problem.current)


def number_moments(state: PepsState) -> tuple[float, float]:
    """
    <N> and <N^2> of the normalized state, from one pass around the ring.
    """
    cache = EnvironmentCache(state, PepsHamiltonian(0.0, {}, 0.0, 0))
    identity = cache.transfer(GROUPS[0])
    moment1 = cache.number_transfer(GROUPS[0])
    moment2 = cache.number_squared_transfer(GROUPS[0])
    for head in GROUPS[1:]:
        plain, number = cache.transfer(head), cache.number_transfer(head)
        moment2 = moment2 @ plain + 2.0 * moment1 @ number + identity @ cache.number_squared_transfer(head)
        moment1 = moment1 @ plain + identity @ number
        identity = identity @ plain
    norm = np.trace(identity).real
    return float(np.trace(moment1).real / norm), float(np.trace(moment2).real / norm)
