import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from data.constants import DEFAULT_FIRST_PEAK_FLOOR, ScanAxis
from dynamics.correlation import Pair, correlation_run
from dynamics.evolution import TimeGrid
from dynamics.initial_state import InitialStateSpec
from fock.params import HamiltonianParams
from fock.spectrum import sector_ground_energy, uniform_ground_energy
from lattice.topology import KagomeTopology
from utils.concurrency import ordered_map
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Window:
    """A contiguous stretch of the scan with one selected sector."""

    n_star: int
    start: float
    end: float

    @property
    def width(self) -> float:
        return self.end - self.start


@dataclass
class ScanResult:
    """
    Grand-canonical sector selection over a mu or kappa grid (energies and grid in J).

    Attributes:
        axis: Scanned parameter.
        grid: Strictly increasing scan values.
        n_values: Sectors compared at every point, ascending.
        energies: (len(grid), len(n_values)) sector energies E_G(N) - mu N.
        selected: N* per grid point.
        boundaries: Midpoints between neighbouring grid points where N* changes.
        windows: Contiguous runs of equal N*, bounded by the grid ends and the boundaries.
        energy_unit: hbar * Omega_R, for the reduced-unit tables.
    """

    axis: ScanAxis
    grid: np.ndarray = field(repr=False)
    n_values: tuple[int, ...]
    energies: np.ndarray = field(repr=False)
    selected: np.ndarray = field(repr=False)
    boundaries: list[float]
    windows: list[Window]
    energy_unit: float
    ties: list[int] = field(default_factory=list)

    def widths(self) -> dict[int, float]:
        """Total extent of every sector's windows (0 for sectors that never win), in J."""
        widths = {n: 0.0 for n in self.n_values}
        for window in self.windows:
            widths[window.n_star] += window.width
        return widths

    def frame(self) -> pd.DataFrame:
        columns = {
            f'{self.axis.value}_over_hbar_OmegaR': self.grid / self.energy_unit,
            'N_star': self.selected,
        }
        for column, n_total in enumerate(self.n_values):
            columns[f'E_N{n_total}_over_hbar_OmegaR'] = self.energies[:, column] / self.energy_unit
        return pd.DataFrame(columns)

    def window_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'N_star': [window.n_star for window in self.windows],
            'start_over_hbar_OmegaR': [window.start / self.energy_unit for window in self.windows],
            'end_over_hbar_OmegaR': [window.end / self.energy_unit for window in self.windows],
            'width_over_hbar_OmegaR': [window.width / self.energy_unit for window in self.windows],
        })


def _sector_energies(axis: ScanAxis, grid: np.ndarray, params: HamiltonianParams, n_values: tuple[int, ...],
                     topology: KagomeTopology) -> np.ndarray:
    energies = np.empty((grid.size, len(n_values)))
    if axis is ScanAxis.MU:
        # the N-sector is closed, so changing mu only shifts its spectrum by -(mu - mu0) N
        reference = np.array([sector_ground_energy(params, n, topology) for n in n_values])
        for row, mu in enumerate(grid):
            energies[row] = reference - (mu - params.mu) * np.asarray(n_values)
        return energies
    for row, kappa in enumerate(grid):
        energies[row] = [uniform_ground_energy(kappa, params.onsite_energy, n, topology) for n in n_values]
    return energies


def _select(energies: np.ndarray, n_values: tuple[int, ...], grid: np.ndarray,
            energy_unit: float) -> tuple[np.ndarray, list[int]]:
    selected = np.empty(grid.size, dtype=int)
    ties = []
    for row, values in enumerate(energies):
        lowest = values.min()
        tolerance = TIE_RTOL * max(abs(lowest), energy_unit)
        candidates = np.flatnonzero(values <= lowest + tolerance)
        selected[row] = n_values[candidates[0]]
        if candidates.size > 1:
            ties.append(row)
            logger.info(f'Tie between sectors {[n_values[c] for c in candidates]} at '
                        f'{grid[row] / energy_unit:.12g} hbar*Omega_R; picking N*={selected[row]}')
    return selected, ties


def _windows(grid: np.ndarray, selected: np.ndarray) -> tuple[list[float], list[Window]]:
    changes = np.flatnonzero(np.diff(selected) != 0)
    boundaries = [float(0.5 * (grid[i] + grid[i + 1])) for i in changes]
    edges = [float(grid[0]), *boundaries, float(grid[-1])]
    starts = [0, *(changes + 1)]
    windows = [Window(int(selected[start]), edges[i], edges[i + 1]) for i, start in enumerate(starts)]
    return boundaries, windows


def fixed_n_window_scan(axis: ScanAxis, grid: Sequence[float], params: HamiltonianParams, n_values: Sequence[int],
                        topology: KagomeTopology) -> ScanResult:
    """
    Pick the sector N* minimizing E_G(N) - mu N at every grid point and report where it changes.

    Along the mu axis the couplings of `params` are kept; along the kappa axis every bond gets the grid value.
    Ties resolve to the smaller N and are logged.

    Args:
        axis (ScanAxis): mu or kappa.
        grid (Sequence[float]): Strictly increasing values in J.
        params (HamiltonianParams): Fixed parameters.
        n_values (Sequence[int]): Sectors to compare.
        topology (KagomeTopology): Cell graph.

    Returns:
        ScanResult: Sector energies, N* per point, boundaries and windows.
    """
    axis = ScanAxis(axis)
    grid = np.asarray(grid, dtype=float)
    n_values = tuple(sorted(set(int(n) for n in n_values)))
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError('Scan grid needs at least two strictly increasing values')
    if not n_values or n_values[0] < 0:
        raise ConfigurationError(f'Sector list must be non-empty and non-negative, got {n_values}')
    if axis is ScanAxis.KAPPA and grid[0] < 0:
        raise ConfigurationError('Coupling grid must be non-negative')

    energies = _sector_energies(axis, grid, params, n_values, topology)
    selected, ties = _select(energies, n_values, grid, params.energy_unit)
    boundaries, windows = _windows(grid, selected)
    logger.info(f'{axis.value} scan over {grid.size} points: N* takes values {sorted(set(selected.tolist()))}')
    return ScanResult(axis, grid, n_values, energies, selected, boundaries, windows, params.energy_unit, ties)


@dataclass(frozen=True)
class LinearFit:
    """Least-squares line y = slope * x + intercept with its coefficient of determination."""

    slope: float
    intercept: float
    r_squared: float
    x: tuple[float, ...]
    y: tuple[float, ...]

    @property
    def residuals(self) -> np.ndarray:
        return np.asarray(self.y) - (self.slope * np.asarray(self.x) + self.intercept)

    def frame(self, x_name: str) -> pd.DataFrame:
        return pd.DataFrame({x_name: self.x, 'energy_over_hbar_OmegaR': self.y, 'residual': self.residuals})


def linear_fit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ConfigurationError('A linear fit needs at least two points')
    if np.ptp(y) == 0.0:
        # linregress leaves r undefined for a flat line
        return LinearFit(0.0, float(y[0]), 1.0, tuple(x.tolist()), tuple(y.tolist()))
    result = linregress(x, y)
    return LinearFit(float(result.slope), float(result.intercept), float(result.rvalue ** 2),
                     tuple(x.tolist()), tuple(y.tolist()))


def energy_vs_n_fit(params: HamiltonianParams, n_values: Sequence[int], topology: KagomeTopology,
                    jobs: int | None = 1) -> LinearFit:
    """Fit ED E_G against N at fixed couplings; energies in hbar * Omega_R."""
    energies = ordered_map(lambda n: params.reduced(sector_ground_energy(params, n, topology)), n_values, jobs)
    fit = linear_fit(list(n_values), energies)
    logger.info(f'E_G vs N: slope {fit.slope:.10g}, R^2 = {fit.r_squared:.12f}')
    return fit


def energy_vs_kappa_fit(kappas: Sequence[float], n_total: int, params: HamiltonianParams, topology: KagomeTopology,
                        jobs: int | None = 1) -> LinearFit:
    """Fit ED E_G against a uniform kappa (J) at fixed N; both axes in hbar * Omega_R."""

    def energy(kappa: float) -> float:
        uniform = params.with_couplings({bond: kappa for bond in topology.bonds})
        return params.reduced(sector_ground_energy(uniform, n_total, topology))

    energies = ordered_map(energy, kappas, jobs)
    fit = linear_fit([params.reduced(kappa) for kappa in kappas], energies)
    logger.info(f'E_G vs kappa at N={n_total}: slope {fit.slope:.10g}, R^2 = {fit.r_squared:.12f}')
    return fit


@dataclass(frozen=True)
class FirstPeakScan:
    """First-peak time of one correlation pair per uniform kappa (kappa in hbar * Omega_R)."""

    pair: Pair
    kappas: tuple[float, ...]
    times: tuple[float | None, ...]

    @property
    def decreasing(self) -> bool:
        """True when every kappa has a peak and the peak times strictly decrease with kappa."""
        if any(time is None for time in self.times):
            return False
        return bool(np.all(np.diff(np.asarray(self.times, dtype=float)) < 0))

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'kappa_over_hbar_OmegaR': self.kappas,
            'first_peak_t_dimensionless': [np.nan if time is None else time for time in self.times],
        })


def first_peak_scan(kappas: Sequence[float], pair: Pair, spec: InitialStateSpec, grid: TimeGrid,
                    params: HamiltonianParams, topology: KagomeTopology, floor: float = DEFAULT_FIRST_PEAK_FLOOR,
                    jobs: int | None = 1) -> FirstPeakScan:
    """
    Evolve the same start under several uniform couplings (J) and record when G_pair first peaks.
    """
    kappas = sorted(float(kappa) for kappa in kappas)

    def first_peak(kappa: float) -> float | None:
        uniform = params.with_couplings({bond: kappa for bond in topology.bonds})
        return correlation_run(spec, grid, uniform, pair, topology).first_peak_time(floor)

    times = ordered_map(first_peak, kappas, jobs)
    for kappa, time in zip(kappas, times):
        if time is None:
            logger.warning(f'No peak of G{pair} above {floor:g} for kappa = {params.reduced(kappa):.6g}')
    return FirstPeakScan(tuple(pair), tuple(params.reduced(kappa) for kappa in kappas), tuple(times))
