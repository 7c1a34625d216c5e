import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd

from fock.params import HamiltonianParams
from lattice.topology import KagomeTopology
from peps.effective import EnvironmentCache, build_effective_pair, hamiltonian_for, peps_energy
from peps.gevp import solve_local_gevp
from peps.layout import SWEEP_ORDER, group_of
from peps.state import PepsConfig, PepsState, init_random, randomize_site, shift_gauge
from utils.errors import SingularEnvironmentError

logger = logging.getLogger(__name__)

# conditioning above which the deviation monitor is not expected to stay small
WELL_CONDITIONED = 1e8


@dataclass
class SweepRecord:
    """
    Summary of one full sweep (clockwise then counterclockwise).

    Attributes:
        sweep: Sweep number N_sw; 0 is the random initial state.
        energy: Functional value after the last local update of the sweep, hbar * Omega_R.
        delta_e: energy minus the previous record's energy (NaN for sweep 0).
        max_deviation: Largest GEVP deviation of the sweep.
        max_conditioned_deviation: Largest deviation among solves with condition number <= 1e8.
        regularized_solves: Solves that dropped N_eff directions.
        kept_tensors: Updates rejected because the solution would have raised the functional.
        reinitialized_sites: Sites re-randomized after a singular environment.
        site_energies: Functional value after each local update, in visiting order.
    """

    sweep: int
    energy: float
    delta_e: float = float('nan')
    max_deviation: float = 0.0
    max_conditioned_deviation: float = 0.0
    regularized_solves: int = 0
    kept_tensors: int = 0
    reinitialized_sites: tuple[int, ...] = ()
    site_energies: tuple[float, ...] = field(default=(), repr=False)


@dataclass
class OptimizationTrace:
    """Per-sweep convergence history of one optimization run."""

    records: list[SweepRecord] = field(default_factory=list)
    converged: bool = False
    tolerance: float = 0.0
    wall_time: float = 0.0

    @property
    def sweeps(self) -> int:
        return self.records[-1].sweep if self.records else 0

    @property
    def energies(self) -> np.ndarray:
        return np.array([record.energy for record in self.records])

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy

    @property
    def best_energy(self) -> float:
        return float(self.energies.min())

    @property
    def regularized_solves(self) -> int:
        return sum(record.regularized_solves for record in self.records)


def move_center(state: PepsState, site: int, following: int) -> None:
    """
    Shift the gauge from the site just optimized towards the next one in the sweep.

    The ring bond between consecutive sites always moves; when the sweep leaves a group, the chord between the two
    inner sites moves as well. Only the group about to be optimized absorbs the triangular factors.
    """
    if following == site:
        return
    shift_gauge(state, site, following)
    head, next_head = group_of(site), group_of(following)
    if head != next_head:
        shift_gauge(state, head, next_head)


def full_sweep(state: PepsState, params: HamiltonianParams, sweep: int = 1,
               cache: EnvironmentCache | None = None) -> tuple[PepsState, SweepRecord]:
    """
    Optimize every tensor once clockwise (1 -> 12) and once counterclockwise (12 -> 1).

    A solution replaces the tensor only when it does not raise the functional; otherwise the tensor is kept. After
    every site the gauge moves on to the next site of the sweep.

    Args:
        state (PepsState): Updated in place and returned.
        params (HamiltonianParams): Physical parameters.
        sweep (int): Sweep number, also used to seed re-randomized tensors.
        cache (EnvironmentCache | None): Environment cache bound to `state`.

    Returns:
        tuple[PepsState, SweepRecord]: The state and the sweep record (delta_e left for the caller).
    """
    cache = cache or EnvironmentCache(state, hamiltonian_for(state, params))
    eps = state.config.regularization_eps
    energies, deviations, conditioned = [], [0.0], [0.0]
    regularized, kept, reinitialized = 0, 0, []
    for position, site in enumerate(SWEEP_ORDER):
        following = SWEEP_ORDER[(position + 1) % len(SWEEP_ORDER)]
        problem = build_effective_pair(state, params, site, cache)
        try:
            _, vector, deviation = solve_local_gevp(problem, eps)
        except SingularEnvironmentError as error:
            logger.warning(f'Sweep {sweep}: {error}; re-randomizing site {site}')
            randomize_site(state, site, state.config.seed, sweep, site)
            reinitialized.append(site)
            move_center(state, site, following)
            continue
        before, after = problem.quotient(problem.current), problem.quotient(vector)
        if after <= before or not np.isfinite(before):
            state.set_array(site, vector.reshape(state.array(site).shape))
            energies.append(after)
        else:
            logger.debug(f'Sweep {sweep}: site {site} kept, solution {after:.12g} above current {before:.12g}')
            energies.append(before)
            kept += 1
        deviations.append(deviation)
        if problem.condition_number <= WELL_CONDITIONED:
            conditioned.append(deviation)
        regularized += int(problem.regularized)
        move_center(state, site, following)

    if reinitialized:
        energies.append(peps_energy(state, params, cache))
    record = SweepRecord(sweep=sweep, energy=energies[-1], max_deviation=max(deviations),
                         max_conditioned_deviation=max(conditioned), regularized_solves=regularized,
                         kept_tensors=kept, reinitialized_sites=tuple(reinitialized), site_energies=tuple(energies))
    if regularized:
        logger.warning(f'Sweep {sweep}: {regularized} regularized solves, max deviation {record.max_deviation:.3e}, '
                       f'{kept} tensors kept')
    return state, record


def optimize(config: PepsConfig, params: HamiltonianParams, topology: KagomeTopology,
             callback: Callable[[SweepRecord], None] | None = None) -> tuple[PepsState, OptimizationTrace]:
    """
    Repeat full sweeps from a random start until |Delta E| < convergence_tol or the sweep budget runs out.

    Args:
        config (PepsConfig): Dimensions, seed and stopping rule.
        params (HamiltonianParams): Physical parameters.
        topology (KagomeTopology): The canonical cell.
        callback (Callable[[SweepRecord], None] | None): Called after every sweep.

    Returns:
        tuple[PepsState, OptimizationTrace]: The lowest-energy state seen and its trace; `trace.converged` is False
        when the budget ran out.
    """
    started = time.perf_counter()
    state = init_random(config, topology)
    cache = EnvironmentCache(state, hamiltonian_for(state, params))
    trace = OptimizationTrace(tolerance=config.convergence_tol)
    trace.records.append(SweepRecord(sweep=0, energy=peps_energy(state, params, cache)))
    best_state, best_energy = state.copy(), trace.records[0].energy

    for sweep in range(1, config.max_sweeps + 1):
        state, record = full_sweep(state, params, sweep, cache)
        record.delta_e = record.energy - trace.records[-1].energy
        trace.records.append(record)
        logger.info(f'Sweep {sweep}: E = {record.energy:.12g}, dE = {record.delta_e:.3e}, '
                    f'max deviation = {record.max_deviation:.3e}')
        if callback is not None:
            callback(record)
        if record.energy <= best_energy:
            best_state, best_energy = state.copy(), record.energy
        if abs(record.delta_e) < config.convergence_tol and not record.reinitialized_sites:
            trace.converged = True
            break

    trace.wall_time = time.perf_counter() - started
    if not trace.converged:
        logger.warning(f'PEPS optimization stopped at the budget of {config.max_sweeps} sweeps without converging')
    return best_state, trace


def trace_frame(trace: OptimizationTrace) -> pd.DataFrame:
    """Trace table with columns (sweep, energy_over_hbar_OmegaR, delta_E, max_deviation, regularized_solves)."""
    return pd.DataFrame({
        'sweep': [record.sweep for record in trace.records],
        'energy_over_hbar_OmegaR': [record.energy for record in trace.records],
        'delta_E': [record.delta_e for record in trace.records],
        'max_deviation': [record.max_deviation for record in trace.records],
        'regularized_solves': [record.regularized_solves for record in trace.records],
    })
