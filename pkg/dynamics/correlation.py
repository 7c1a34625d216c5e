import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from data.constants import DEFAULT_FIRST_PEAK_FLOOR
from dynamics.evolution import SpectralPropagator, TimeGrid
from dynamics.initial_state import InitialStateSpec, build_initial_state
from fock.basis import FockBasis, enumerate_basis
from fock.hamiltonian import build_hamiltonian
from fock.params import HamiltonianParams
from lattice.topology import KagomeTopology
from utils.concurrency import ordered_map
from utils.errors import ConfigurationError, StateError

if TYPE_CHECKING:
    from experiments.disorder import DisorderSpec

logger = logging.getLogger(__name__)

Pair = tuple[int, int]

STATE_NORM_TOL = 1e-8


@dataclass
class CorrelationSeries:
    """
    G_{k,k'}(t) = <Psi(t)| n_k n_k' |Psi(t)> sampled on a time grid.

    Attributes:
        pair: The two cavities (k, k').
        times: Dimensionless sample times.
        values: Real, non-negative samples.
        metadata: Couplings, seed, initial state and pair for the sidecar record.
    """

    pair: Pair
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    metadata: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def peak(self) -> float:
        """Global maximum over the grid."""
        return float(self.values.max())

    @property
    def contrast(self) -> float:
        """Peak-to-trough contrast max - min over the grid."""
        return float(self.values.max() - self.values.min())

    def first_peak_time(self, floor: float = DEFAULT_FIRST_PEAK_FLOOR) -> float | None:
        """
        Time of the first strict local maximum whose value exceeds `floor`; None if there is none.
        """
        values = self.values
        rising = (values[1:-1] > values[:-2]) & (values[1:-1] > values[2:]) & (values[1:-1] > floor)
        hits = np.flatnonzero(rising)
        return float(self.times[hits[0] + 1]) if hits.size else None

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({'t_dimensionless': self.times, 'G_value': self.values})


def _pair_weights(pair: Pair, basis: FockBasis) -> np.ndarray:
    k, other = pair
    for site in pair:
        if site not in basis.site_column:
            raise ConfigurationError(f'Site {site} is not part of the basis')
    return (basis.site_numbers(k) * basis.site_numbers(other)).astype(float)


def correlation(pair: Pair, states: np.ndarray, basis: FockBasis, times: np.ndarray,
                metadata: dict[str, Any] | None = None) -> CorrelationSeries:
    """
    Two-point photon-number correlation of an evolution.

    Args:
        pair (Pair): Cavities (k, k'); k == k' gives <n_k^2>.
        states (np.ndarray): (n_samples, dim) evolution output.
        basis (FockBasis): Basis of the states.
        times (np.ndarray): Sample times matching the rows of `states`.
        metadata (dict[str, Any] | None): Record copied into the series.

    Returns:
        CorrelationSeries: G(t) = sum_states |amplitude(t)|^2 n_k n_k'.

    Raises:
        StateError: If the states are not unit-norm or do not match the basis.
    """
    states = np.atleast_2d(states)
    if states.shape != (len(times), basis.dimension):
        raise StateError(f'States of shape {states.shape} do not match ({len(times)}, {basis.dimension})')
    weights = np.abs(states) ** 2
    norms = weights.sum(axis=1)
    if np.max(np.abs(norms - 1.0)) > STATE_NORM_TOL:
        raise StateError('Correlation needs unit-norm states')
    values = weights @ _pair_weights(pair, basis)
    record = dict(metadata or {})
    record['pair'] = list(pair)
    return CorrelationSeries(pair=tuple(pair), times=np.asarray(times, dtype=float), values=values, metadata=record)


def dialogue_ranking(states: np.ndarray, basis: FockBasis, times: np.ndarray,
                     reference: int = 1) -> list[tuple[int, float]]:
    """
    Partner cavities of `reference` ordered by the peak of G_{reference,k'} over the grid, strongest first.
    """
    ranking = [(site, correlation((reference, site), states, basis, times).peak)
               for site in basis.sites if site != reference]
    return sorted(ranking, key=lambda item: (-item[1], item[0]))


def evolve_initial_state(spec: InitialStateSpec, grid: TimeGrid, params: HamiltonianParams,
                         topology: KagomeTopology) -> tuple[np.ndarray, FockBasis]:
    """Diagonalize the sector of `spec`, build the start vector and evolve it over the grid."""
    basis = enumerate_basis(spec.n_total, topology)
    propagator = SpectralPropagator(build_hamiltonian(params, basis, topology))
    return propagator.evolve(build_initial_state(spec, basis), grid), basis


def correlation_run(spec: InitialStateSpec, grid: TimeGrid, params: HamiltonianParams, pair: Pair,
                    topology: KagomeTopology, metadata: dict[str, Any] | None = None) -> CorrelationSeries:
    """One evolution reduced to the correlation of a single pair."""
    states, basis = evolve_initial_state(spec, grid, params, topology)
    record = {
        'initial_state': spec.describe(),
        'couplings_over_hbar_OmegaR': {f'{u}-{v}': params.reduced(kappa)
                                        for (u, v), kappa in sorted(params.couplings.items())},
    }
    record.update(metadata or {})
    return correlation(pair, states, basis, grid.times, record)


@dataclass
class EnsembleCorrelation:
    """Per-realization correlation series of a disorder ensemble plus their mean."""

    realizations: list[CorrelationSeries]
    mean: CorrelationSeries

    def frame(self) -> pd.DataFrame:
        """Long table with a realization column; the mean is labeled -1."""
        frames = [series.frame().assign(realization=index) for index, series in enumerate(self.realizations)]
        frames.append(self.mean.frame().assign(realization=-1))
        return pd.concat(frames, ignore_index=True)[['realization', 't_dimensionless', 'G_value']]


def disorder_correlation(spec: InitialStateSpec, disorder: 'DisorderSpec', grid: TimeGrid,
                         params: HamiltonianParams, pair: Pair, topology: KagomeTopology,
                         jobs: int | None = 1) -> EnsembleCorrelation:
    """
    Evolve the same start under every sampled coupling map of a disorder ensemble.

    Realization i uses the seed stream (master_seed, i); results are ordered by i whatever `jobs` is.

    Args:
        spec (InitialStateSpec): Start of every evolution.
        disorder (DisorderSpec): Interval, master seed and realization count.
        grid (TimeGrid): Dimensionless sample times.
        params (HamiltonianParams): omega_d, mu and units; couplings are replaced per realization.
        pair (Pair): Cavities of the correlation.
        topology (KagomeTopology): Cell graph.
        jobs (int | None): Worker cap.

    Returns:
        EnsembleCorrelation: One series per realization and the ensemble mean.
    """
    from experiments.disorder import sample_couplings

    def run(index: int) -> CorrelationSeries:
        couplings = sample_couplings(disorder, index, topology.bonds)
        return correlation_run(spec, grid, params.with_couplings(couplings), pair, topology,
                               {'master_seed': disorder.master_seed, 'realization': index})

    series = ordered_map(run, range(disorder.realizations), jobs)
    mean_values = np.mean([item.values for item in series], axis=0)
    mean = CorrelationSeries(pair=tuple(pair), times=grid.times, values=mean_values, metadata={
        'pair': list(pair), 'master_seed': disorder.master_seed, 'realizations': disorder.realizations,
        'initial_state': spec.describe(),
    })
    logger.info(f'Ensemble of {disorder.realizations} realizations: mean contrast {mean.contrast:.6g}')
    return EnsembleCorrelation(series, mean)
