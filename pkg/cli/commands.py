import logging
import os
import platform
import time
from contextlib import contextmanager
from dataclasses import asdict
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

import numpy as np
import pandas as pd
import psutil

from cli.manifest import Manifest, load_manifest
from data.constants import (DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV, DisorderDistribution, ExitCode, ExperimentKind,
                            InitialStateKind, ScanAxis)
from dynamics.correlation import CorrelationSeries, correlation, correlation_run, dialogue_ranking, disorder_correlation
from dynamics.evolution import SpectralPropagator, TimeGrid, conservation_report
from dynamics.initial_state import InitialStateSpec, build_initial_state
from experiments.benchmark import benchmark_peps_vs_ed
from experiments.disorder import DisorderSpec, disorder_energy_bounds, occupation_asymmetry
from experiments.scan import first_peak_scan, fixed_n_window_scan
from fock.basis import enumerate_basis
from fock.hamiltonian import build_hamiltonian
from fock.spectrum import ed_spectrum, local_occupations, occupations_frame, sector_ground_energy, spectrum_frame
from lattice.topology import KagomeTopology, build_unit_cell, export_edge_list, validate
from peps.checkpoint import save_checkpoint
from peps.observables import peps_local_occupations, peps_readouts
from peps.state import PepsConfig
from peps.sweep import optimize, trace_frame
from utils.data_helper import to_builtin, write_csv, write_json
from utils.errors import ConfigurationError, KagomeError, NumericalError

logger = logging.getLogger(__name__)

SUMMARY_FILE = 'run_summary.json'
ERROR_FILE = 'error.json'
UNEXPECTED_ERROR_CODE = 1
REPORTED_PACKAGES = ('numpy', 'scipy', 'opt_einsum', 'pandas', 'matplotlib', 'pyyaml', 'psutil')


def output_root() -> Path:
    return Path(os.getenv(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT)


def resolve_output_dir(manifest: Manifest, out: str | Path | None = None) -> Path:
    """`--out` wins, then the manifest's output_dir, then <output root>/<kind>-<config hash prefix>."""
    if out is not None:
        return Path(out)
    if manifest['output_dir'] is not None:
        return Path(manifest['output_dir'])
    return output_root() / f'{manifest.kind.value}-{manifest.config_hash[:12]}'


class RunContext:
    """
    Collects artifacts, per-phase timings and result records of one run.

    CSV bodies carry no wall-clock data; timings go to the run summary only.
    """

    def __init__(self, manifest: Manifest, out_dir: Path, jobs: int | None = 1, plot: bool = False):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.manifest = manifest
        self.out_dir = Path(out_dir)
        self.jobs = jobs
        self.plot = plot
        self.timings: dict[str, float] = {}
        self.artifacts: list[str] = []
        self.results: dict[str, Any] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - started

    def register(self, path: Path) -> Path:
        self.artifacts.append(path.relative_to(self.out_dir).as_posix())
        self.logger.info(f'Wrote {path}')
        return path

    def csv(self, name: str, frame: pd.DataFrame, **extra: Any) -> Path:
        header = {'config_hash': self.manifest.config_hash, 'kind': self.manifest.kind.value, **extra}
        return self.register(write_csv(self.out_dir / name, frame, header))

    def json(self, name: str, payload: Any) -> Path:
        return self.register(write_json(self.out_dir / name, payload))

    def svg(self, name: str, plotter: Callable[..., Path], *args, **kwargs) -> Path | None:
        if not self.plot:
            return None
        with self.phase('plot'):
            return self.register(plotter(*args, path=self.out_dir / name, **kwargs))


def _initial_state(manifest: Manifest) -> InitialStateSpec:
    try:
        kind = InitialStateKind(manifest['initial_state.kind'])
    except ValueError:
        raise ConfigurationError(f'Unknown initial state kind {manifest["initial_state.kind"]!r}') from None
    if kind is InitialStateKind.LOCALIZED:
        return InitialStateSpec.localized(manifest['initial_state.site'], manifest['initial_state.photons'])
    if kind is InitialStateKind.SUPERPOSITION:
        return InitialStateSpec.superposition(manifest['initial_state.phase'], manifest['initial_state.sites'])
    return InitialStateSpec(kind=kind, amplitudes=tuple(manifest['initial_state.amplitudes']))


def _time_grid(manifest: Manifest) -> TimeGrid:
    return TimeGrid(manifest['time.t_start'], manifest['time.t_end'], manifest['time.n_samples'])


def _disorder(manifest: Manifest) -> DisorderSpec:
    master_seed = manifest['disorder.master_seed']
    try:
        distribution = DisorderDistribution(manifest['disorder.distribution'])
    except ValueError:
        raise ConfigurationError(f'Unknown disorder distribution {manifest["disorder.distribution"]!r}') from None
    return DisorderSpec(kappa_low=manifest['disorder.kappa_low'], kappa_high=manifest['disorder.kappa_high'],
                        master_seed=manifest.seed if master_seed is None else master_seed,
                        realizations=manifest['disorder.realizations'], distribution=distribution)


def _series_name(prefix: str, series: CorrelationSeries) -> str:
    return f'{prefix}_{series.pair[0]}_{series.pair[1]}'


def _metrics_row(label: Any, series: CorrelationSeries, floor: float) -> dict[str, Any]:
    return {'label': label, 'k': series.pair[0], 'k_prime': series.pair[1], 'peak': series.peak,
            'contrast': series.contrast, 'first_peak_t_dimensionless': series.first_peak_time(floor)}


def run_ed_spectrum(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    params = manifest.params()
    n_total = manifest['ed.n_photons']
    with context.phase('diagonalize'):
        basis = enumerate_basis(n_total, topology)
        pairs = ed_spectrum(build_hamiltonian(params, basis, topology), manifest['ed.k_lowest'] or basis.dimension)
        occupations = local_occupations(pairs[0].vector, basis)
    context.csv('spectrum.csv', spectrum_frame(pairs, params), n_photons=n_total, dimension=basis.dimension)
    context.csv('occupations.csv', occupations_frame(occupations), n_photons=n_total)
    context.results.update(dimension=basis.dimension, ground_energy_over_hbar_OmegaR=params.reduced(pairs[0].energy),
                           occupation_asymmetry=asdict(occupation_asymmetry(occupations, topology)))


def run_peps_optimize(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    params = manifest.params()
    config = PepsConfig(n_total=manifest['peps.n_photons'], bond_cap=manifest['peps.bond_cap'], seed=manifest.seed,
                        convergence_tol=manifest['peps.convergence_tol'], max_sweeps=manifest['peps.max_sweeps'],
                        regularization_eps=manifest['peps.regularization_eps'],
                        number_penalty=manifest['peps.number_penalty'])
    with context.phase('optimize'):
        state, trace = optimize(config, params, topology)
    with context.phase('readouts'):
        readouts = peps_readouts(state, params)
        occupations = peps_local_occupations(state)
        ed_energy = params.reduced(sector_ground_energy(params, config.n_total, topology))
    frame = trace_frame(trace)
    context.csv('trace.csv', frame, n_photons=config.n_total, bond_dim=config.max_bond_dim, seed=config.seed)
    context.csv('readouts.csv', pd.DataFrame([asdict(readouts)]), n_photons=config.n_total)
    context.csv('occupations.csv', occupations_frame(occupations), n_photons=config.n_total)
    if manifest['peps.checkpoint']:
        context.register(save_checkpoint(state, context.out_dir / 'state.npz'))
    context.svg('trace.svg', _plot('plot_trace'), frame, reference=ed_energy)
    context.results.update(converged=trace.converged, sweeps=trace.sweeps, wall_time=trace.wall_time,
                           readouts=asdict(readouts), ed_energy_over_hbar_OmegaR=ed_energy,
                           regularized_solves=trace.regularized_solves)


def run_benchmark(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    with context.phase('benchmark'):
        report = benchmark_peps_vs_ed(
            manifest['benchmark.n_photons'], manifest.params(), topology, manifest['benchmark.d_policy'],
            seed=manifest.seed, max_sweeps=manifest['benchmark.max_sweeps'],
            convergence_tol=manifest['benchmark.convergence_tol'], number_penalty=manifest['benchmark.number_penalty'],
            ed_n_values=manifest['benchmark.ed_n_photons'], jobs=context.jobs)
    frame = report.frame()
    context.csv('benchmark.csv', frame)
    context.csv('ed_fit.csv', report.ed_fit.frame('N'), slope=report.ed_fit.slope,
                intercept=report.ed_fit.intercept, r_squared=report.ed_fit.r_squared)
    for row in report.rows:
        context.csv(f'trace_N{row.n_total}.csv', trace_frame(row.trace), n_photons=row.n_total, bond_dim=row.bond_dim)
    context.svg('benchmark.svg', _plot('plot_table'), frame, 'N',
                ['peps_energy_over_hbar_OmegaR', 'ed_energy_over_hbar_OmegaR'])
    context.results.update(
        wall_times={str(row.n_total): row.wall_time for row in report.rows},
        ed_fit={'slope': report.ed_fit.slope, 'intercept': report.ed_fit.intercept,
                'r_squared': report.ed_fit.r_squared},
        violations=[str(violation) for violation in report.violations])


def run_dynamics(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    params = manifest.params()
    spec, grid = _initial_state(manifest), _time_grid(manifest)
    floor = manifest['dynamics.first_peak_floor']
    with context.phase('evolve'):
        basis = enumerate_basis(spec.n_total, topology)
        hamiltonian = build_hamiltonian(params, basis, topology)
        states = SpectralPropagator(hamiltonian).evolve(build_initial_state(spec, basis), grid)
        report = conservation_report(hamiltonian, states, basis)
    if not report.within():
        logger.warning(f'Conservation drifts exceed 1e-10: {report}')
    record = {'initial_state': spec.describe(), 'seed': manifest.seed,
              'couplings_over_hbar_OmegaR': {f'{u}-{v}': params.reduced(kappa)
                                              for (u, v), kappa in sorted(params.couplings.items())}}
    all_series = []
    for pair in manifest['dynamics.pairs']:
        series = correlation(pair, states, basis, grid.times, record)
        all_series.append(series)
        name = _series_name('correlation', series)
        context.csv(f'{name}.csv', series.frame(), pair=list(series.pair))
        context.json(f'{name}.json', series.metadata)
    context.csv('correlation_metrics.csv', pd.DataFrame([_metrics_row('run', item, floor) for item in all_series]))
    reference = manifest['dynamics.ranking_reference']
    if reference is not None:
        ranking = dialogue_ranking(states, basis, grid.times, reference)
        context.csv('dialogue_ranking.csv', pd.DataFrame(ranking, columns=['site', 'peak']), reference=reference)
        context.results['strongest_partner'] = ranking[0][0]
    context.svg('correlations.svg', _plot('plot_correlations'), all_series)
    context.results['conservation'] = asdict(report)


def run_disorder_dynamics(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    params = manifest.params()
    spec, grid, disorder = _initial_state(manifest), _time_grid(manifest), _disorder(manifest)
    pair = manifest['dynamics.pair']
    floor = manifest['dynamics.first_peak_floor']
    with context.phase('ensemble'):
        ensemble = disorder_correlation(spec, disorder, grid, params, pair, topology, context.jobs)
        midpoint = correlation_run(spec, grid, params.with_couplings({bond: disorder.midpoint
                                                                      for bond in topology.bonds}),
                                   pair, topology, {'midpoint': True})
    suffix = f'{pair[0]}_{pair[1]}'
    context.csv(f'ensemble_{suffix}.csv', ensemble.frame(), pair=list(pair), master_seed=disorder.master_seed,
                realizations=disorder.realizations)
    context.csv(f'midpoint_{suffix}.csv', midpoint.frame(), pair=list(pair))
    rows = [_metrics_row(index, series, floor) for index, series in enumerate(ensemble.realizations)]
    rows += [_metrics_row('mean', ensemble.mean, floor), _metrics_row('midpoint', midpoint, floor)]
    context.csv('ensemble_metrics.csv', pd.DataFrame(rows))
    context.json('realizations.json', [series.metadata for series in ensemble.realizations])
    kappas = manifest['dynamics.first_peak_kappas']
    if kappas:
        with context.phase('first_peak_scan'):
            scan = first_peak_scan(kappas, pair, spec, grid, params, topology, floor, context.jobs)
        context.csv('first_peak_scan.csv', scan.frame(), pair=list(pair))
        context.results['first_peak_decreasing'] = scan.decreasing
    context.svg(f'ensemble_{suffix}.svg', _plot('plot_correlations'), [ensemble.mean, midpoint],
                title='ensemble mean vs uniform midpoint')
    context.results.update(mean_contrast=ensemble.mean.contrast, midpoint_contrast=midpoint.contrast)


def run_disorder_energy(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    disorder = _disorder(manifest)
    n_total = manifest['ed.n_photons']
    with context.phase('diagonalize'):
        report = disorder_energy_bounds(disorder, n_total, manifest.params(), topology, context.jobs)
    context.csv('disorder_energies.csv', report.frame(), n_photons=n_total, master_seed=disorder.master_seed)
    context.results.update(violations=[str(violation) for violation in report.violations],
                           bounds_hold=report.holds)


def run_mu_scan(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    try:
        axis = ScanAxis(manifest['scan.axis'])
    except ValueError:
        raise ConfigurationError(f'Unknown scan axis {manifest["scan.axis"]!r}') from None
    grid = np.linspace(manifest['scan.start'], manifest['scan.stop'], manifest['scan.points'])
    with context.phase('scan'):
        result = fixed_n_window_scan(axis, grid, manifest.params(), manifest['scan.n_photons'], topology)
    frame = result.frame()
    context.csv('scan.csv', frame, axis=axis.value)
    context.csv('windows.csv', result.window_frame(), axis=axis.value)
    context.svg('scan.svg', _plot('plot_table'), frame, frame.columns[0], ['N_star'], step=True)
    context.results.update(boundaries_over_hbar_OmegaR=[value / result.energy_unit for value in result.boundaries],
                           ties=len(result.ties))


def run_topology_export(manifest: Manifest, context: RunContext, topology: KagomeTopology) -> None:
    context.register(export_edge_list(topology, context.out_dir / 'edges.txt'))
    frame = pd.DataFrame({
        'site': list(topology.sites),
        'role': [topology.role[site].value for site in topology.sites],
        'x': [topology.coordinates[site][0] for site in topology.sites],
        'y': [topology.coordinates[site][1] for site in topology.sites],
        'degree': [topology.degree(site) for site in topology.sites],
    })
    context.csv('sites.csv', frame)
    context.results['violations'] = [str(violation) for violation in validate(topology)]


def _plot(name: str) -> Callable[..., Path]:
    # matplotlib loads only when a plot is requested
    def plotter(*args, **kwargs) -> Path:
        from cli import plotting
        return getattr(plotting, name)(*args, **kwargs)
    return plotter


RUNNERS: dict[ExperimentKind, Callable[[Manifest, RunContext, KagomeTopology], None]] = {
    ExperimentKind.ED_SPECTRUM: run_ed_spectrum,
    ExperimentKind.PEPS_OPTIMIZE: run_peps_optimize,
    ExperimentKind.BENCHMARK: run_benchmark,
    ExperimentKind.DYNAMICS: run_dynamics,
    ExperimentKind.DISORDER_DYNAMICS: run_disorder_dynamics,
    ExperimentKind.DISORDER_ENERGY: run_disorder_energy,
    ExperimentKind.MU_SCAN: run_mu_scan,
    ExperimentKind.TOPOLOGY_EXPORT: run_topology_export,
}


def package_versions() -> dict[str, str | None]:
    versions: dict[str, str | None] = {'python': platform.python_version()}
    for package in REPORTED_PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = None
    return versions


def execute(manifest: Manifest, out_dir: Path, jobs: int | None = 1, plot: bool = False) -> RunContext:
    """
    Run one validated manifest and write its artifacts plus `run_summary.json` into `out_dir`.
    """
    context = RunContext(manifest, out_dir, jobs, plot)
    context.out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f'Running {manifest.kind.value} into {context.out_dir}')
    with context.phase('total'):
        topology = build_unit_cell()
        RUNNERS[manifest.kind](manifest, context, topology)
    write_json(context.out_dir / SUMMARY_FILE, {
        'status': 'ok',
        'kind': manifest.kind.value,
        'config_hash': manifest.config_hash,
        'manifest': to_builtin(manifest.resolved()),
        'source': manifest.source,
        'versions': package_versions(),
        'host': {'cpu_count': psutil.cpu_count(), 'total_memory_bytes': psutil.virtual_memory().total},
        'jobs': jobs,
        'timings_seconds': context.timings,
        'artifacts': context.artifacts,
        'results': context.results,
    })
    logger.info(f'{manifest.kind.value} finished in {context.timings["total"]:.2f} s, '
                f'{len(context.artifacts)} artifacts')
    return context


def write_error(directory: Path, error: BaseException, exit_code: int) -> Path:
    """Machine-readable failure record next to the run's artifacts."""
    return write_json(Path(directory) / ERROR_FILE, {
        'status': 'error',
        'exit_code': exit_code,
        'error': type(error).__name__,
        'message': str(error),
    })


def run(manifest_path: str | Path, overrides: Iterable[str] = (), jobs: int | None = 1, out: str | Path | None = None,
        seed: int | None = None, plot: bool = False) -> int:
    """
    Load, validate and execute a manifest; return the process exit status.

    Failures write `error.json` into the run directory (or the output root when the manifest never loaded) and
    map to exit codes 2 (parse), 3 (validation), 4 (capacity) and 5 (numerical).
    """
    out_dir: Path | None = Path(out) if out is not None else None
    try:
        manifest = load_manifest(manifest_path, overrides, seed)
        out_dir = resolve_output_dir(manifest, out)
        execute(manifest, out_dir, jobs, plot)
        return ExitCode.SUCCESS.value
    except KagomeError as error:
        logger.error(f'{type(error).__name__}: {error}')
        return _fail(out_dir, error, error.exit_code.value)
    except (np.linalg.LinAlgError, FloatingPointError) as error:
        logger.error(f'Numerical failure: {error}')
        return _fail(out_dir, error, NumericalError.exit_code.value)
    except Exception as error:  # noqa: BLE001
        logger.exception(f'Unexpected failure: {error}')
        return _fail(out_dir, error, UNEXPECTED_ERROR_CODE)


def _fail(out_dir: Path | None, error: BaseException, code: int) -> int:
    write_error(out_dir or output_root(), error, code)
    return code
