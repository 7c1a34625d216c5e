import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import pandas as pd

from data.constants import DEFAULT_CONVERGENCE_TOL, DEFAULT_MAX_SWEEPS
from experiments.scan import LinearFit, energy_vs_n_fit
from fock.params import HamiltonianParams
from fock.spectrum import sector_ground_energy
from lattice.topology import KagomeTopology
from peps.observables import peps_readouts
from peps.state import PepsConfig
from peps.sweep import OptimizationTrace, optimize
from utils.concurrency import ordered_map
from utils.errors import CapacityError
from utils.soft_assert import SoftAssertContextManager, Violation

logger = logging.getLogger(__name__)

MAX_PEPS_PHOTONS = 3
MAX_BENCHMARK_ED_PHOTONS = 5
# N -> bond cap D; photon numbers not listed run uncapped (D = d^2)
DEFAULT_D_POLICY: dict[int, int] = {3: 6}
VARIATIONAL_SLACK = 1e-9


@dataclass
class BenchmarkRow:
    """
    One PEPS-vs-ED comparison, energies in hbar * Omega_R.

    `wall_time` stays in memory and the run summary; it is never written to CSV.
    """

    n_total: int
    bond_dim: int
    peps_energy: float
    ed_energy: float
    sweeps: int
    converged: bool
    wall_time: float
    mean_number: float = float('nan')
    sector_energy: float | None = None
    trace: OptimizationTrace | None = field(default=None, repr=False)

    @property
    def difference(self) -> float:
        return self.peps_energy - self.ed_energy


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]
    ed_fit: LinearFit
    violations: list[Violation] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'N': [row.n_total for row in self.rows],
            'D': [row.bond_dim for row in self.rows],
            'peps_energy_over_hbar_OmegaR': [row.peps_energy for row in self.rows],
            'ed_energy_over_hbar_OmegaR': [row.ed_energy for row in self.rows],
            'difference': [row.difference for row in self.rows],
            'peps_sector_energy_over_hbar_OmegaR': [row.sector_energy for row in self.rows],
            'peps_mean_number': [row.mean_number for row in self.rows],
            'sweeps': [row.sweeps for row in self.rows],
            'converged': [row.converged for row in self.rows],
        })


def _benchmark_row(n_total: int, params: HamiltonianParams, topology: KagomeTopology, bond_cap: int | None,
                   seed: int, max_sweeps: int, convergence_tol: float,
                   number_penalty: float | None) -> BenchmarkRow:
    config = PepsConfig(n_total=n_total, bond_cap=bond_cap, seed=seed, max_sweeps=max_sweeps,
                        convergence_tol=convergence_tol, number_penalty=number_penalty)
    logger.info(f'Benchmark N={n_total}: optimizing PEPS with D={config.max_bond_dim}')
    state, trace = optimize(config, params, topology)
    readouts = peps_readouts(state, params)
    ed_energy = params.reduced(sector_ground_energy(params, n_total, topology))
    row = BenchmarkRow(n_total=n_total, bond_dim=config.max_bond_dim, peps_energy=readouts.functional_energy,
                       ed_energy=ed_energy, sweeps=trace.sweeps, converged=trace.converged,
                       wall_time=trace.wall_time, mean_number=readouts.mean_number,
                       sector_energy=readouts.sector_energy, trace=trace)
    logger.info(f'Benchmark N={n_total}: PEPS {row.peps_energy:.12g}, ED {row.ed_energy:.12g}, '
                f'difference {row.difference:.3e}')
    return row


def benchmark_peps_vs_ed(n_values: Sequence[int], params: HamiltonianParams, topology: KagomeTopology,
                         d_policy: Mapping[int, int] | None = None, seed: int = 0,
                         max_sweeps: int = DEFAULT_MAX_SWEEPS, convergence_tol: float = DEFAULT_CONVERGENCE_TOL,
                         number_penalty: float | None = None, ed_n_values: Sequence[int] | None = None,
                         jobs: int | None = 1) -> BenchmarkReport:
    """
    Compare converged PEPS energies with exact sector ground energies and fit the ED energies against N.

    Args:
        n_values (Sequence[int]): Photon numbers of the PEPS rows, each <= 3.
        params (HamiltonianParams): Physical parameters.
        topology (KagomeTopology): Cell graph.
        d_policy (Mapping[int, int] | None): Bond cap per N; defaults to D = 6 at N = 3, uncapped otherwise.
        seed (int): Seed of every PEPS initialization.
        max_sweeps (int): Sweep budget per row.
        convergence_tol (float): |Delta E| stopping rule.
        number_penalty (float | None): Passed to PepsConfig.
        ed_n_values (Sequence[int] | None): Photon numbers of the ED fit, each <= 5; defaults to 1..max(n_values).
        jobs (int | None): Worker cap; rows are independent.

    Returns:
        BenchmarkReport: Rows ordered like `n_values`, the ED fit and any variational-order violations.

    Raises:
        CapacityError: If a PEPS row asks for N > 3 or the fit for N > 5.
    """
    policy = DEFAULT_D_POLICY if d_policy is None else dict(d_policy)
    n_values = [int(n) for n in n_values]
    too_large = [n for n in n_values if n > MAX_PEPS_PHOTONS]
    if too_large:
        raise CapacityError(f'PEPS benchmark is limited to N <= {MAX_PEPS_PHOTONS}, got {too_large}')
    if ed_n_values is None:
        ed_n_values = list(range(1, max(n_values, default=1) + 1))
    if max(ed_n_values, default=0) > MAX_BENCHMARK_ED_PHOTONS:
        raise CapacityError(f'ED side of the benchmark is limited to N <= {MAX_BENCHMARK_ED_PHOTONS}')

    rows = ordered_map(
        lambda n: _benchmark_row(n, params, topology, policy.get(n), seed, max_sweeps, convergence_tol,
                                 number_penalty),
        n_values, jobs)
    fit = energy_vs_n_fit(params, ed_n_values, topology, jobs)

    checker = SoftAssertContextManager()
    for row in rows:
        checker.expect(row.difference >= -VARIATIONAL_SLACK, 'variational-order', detail=(
            f'N={row.n_total}: PEPS {row.peps_energy:.12g} below ED {row.ed_energy:.12g}'))
    violations = checker.get_failures()
    for violation in violations:
        logger.warning(f'Benchmark violation: {violation}')
    return BenchmarkReport(rows, fit, violations)
