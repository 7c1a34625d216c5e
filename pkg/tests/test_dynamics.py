import numpy as np
import pytest
import scipy.linalg

from dynamics.correlation import (CorrelationSeries, correlation, correlation_run, dialogue_ranking,
                                  disorder_correlation, evolve_initial_state)
from dynamics.evolution import SpectralPropagator, TimeGrid, conservation_report, spectral_evolve
from dynamics.initial_state import InitialStateSpec, build_initial_state
from experiments.disorder import DisorderSpec
from experiments.scan import first_peak_scan
from fock.basis import enumerate_truncated_basis
from fock.hamiltonian import build_hamiltonian
from utils.errors import ConfigurationError, NumericalError, SectorError, StateError

GRID = TimeGrid(0.0, 30.0, 3001)


def _mirror(site: int) -> int:
    return (13 - site) % 12 + 1


class TestTimeGrid:

    def test_samples(self):
        grid = TimeGrid(0.0, 1.0, 11)
        assert grid.times[0] == 0.0 and grid.times[-1] == 1.0
        assert grid.step == pytest.approx(0.1)

    def test_with_step(self):
        assert TimeGrid.with_step(10.0, 0.01).step <= 0.01

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1), (1.0, 1.0, 10), (0.0, float('nan'), 10)])
    def test_invalid(self, args):
        with pytest.raises(ConfigurationError):
            TimeGrid(*args)


class TestInitialState:

    def test_localized(self, make_basis):
        basis = make_basis(2)
        vector = build_initial_state(InitialStateSpec.localized(1, 2), basis)
        assert vector[basis.lookup(basis.localized(1))] == 1.0
        assert np.linalg.norm(vector) == pytest.approx(1.0)

    def test_superposition_amplitudes(self, make_basis):
        basis = make_basis(2)
        vector = build_initial_state(InitialStateSpec.superposition(np.pi / 2, (1, 7)), basis)
        mixed = [0] * 12
        mixed[0] = mixed[6] = 1
        assert vector[basis.lookup(tuple(mixed))] == pytest.approx(1j / np.sqrt(3))
        assert vector[basis.lookup(basis.localized(7))] == pytest.approx(1 / np.sqrt(3))
        assert np.count_nonzero(vector) == 3

    def test_custom_is_normalized(self, make_basis):
        basis = make_basis(1)
        spec = InitialStateSpec.custom({(1,) + (0,) * 11: 3.0, (0,) * 6 + (1,) + (0,) * 5: 4.0j})
        vector = build_initial_state(spec, basis)
        assert np.linalg.norm(vector) == pytest.approx(1.0)
        assert vector[basis.lookup((1,) + (0,) * 11)] == pytest.approx(0.6)

    def test_sector_mismatch(self, make_basis):
        with pytest.raises(SectorError):
            build_initial_state(InitialStateSpec.localized(1, 3), make_basis(2))

    def test_truncated_basis_rejected(self, topology):
        with pytest.raises(SectorError):
            build_initial_state(InitialStateSpec.localized(1, 1), enumerate_truncated_basis(1, topology))

    def test_superposition_needs_distinct_sites(self):
        with pytest.raises(ConfigurationError):
            InitialStateSpec.superposition(0.0, (3, 3))


class TestEvolution:

    def test_first_sample_is_initial_state(self, uniform_params, topology, make_basis):
        basis = make_basis(2)
        psi0 = build_initial_state(InitialStateSpec.localized(1, 2), basis)
        states = spectral_evolve(build_hamiltonian(uniform_params, basis, topology), psi0, TimeGrid(0.0, 1.0, 5))
        np.testing.assert_allclose(states[0], psi0, atol=1e-12)

    def test_zero_coupling_is_a_global_phase(self, make_params, topology, make_basis):
        params = make_params(kappa=0.0)
        basis = make_basis(2)
        psi0 = build_initial_state(InitialStateSpec.localized(3, 2), basis)
        grid = TimeGrid(0.0, 2.0, 21)
        states = spectral_evolve(build_hamiltonian(params, basis, topology), psi0, grid)
        expected = np.exp(-1j * 20.0 * grid.times)[:, None] * psi0[None, :]
        np.testing.assert_allclose(states, expected, atol=1e-10)

    def test_eigenvector_only_picks_up_phase(self, uniform_params, topology, make_basis):
        basis = make_basis(2)
        propagator = SpectralPropagator(build_hamiltonian(uniform_params, basis, topology))
        grid = TimeGrid(0.0, 3.0, 7)
        states = propagator.evolve(propagator.vectors[:, 0], grid)
        expected = np.exp(-1j * propagator.energies[0] * grid.times)[:, None] * propagator.vectors[:, 0][None, :]
        np.testing.assert_allclose(states, expected, atol=1e-10)

    def test_matches_matrix_exponential(self, uniform_params, topology, make_basis):
        basis = make_basis(1)
        H = build_hamiltonian(uniform_params, basis, topology)
        psi0 = build_initial_state(InitialStateSpec.localized(1, 1), basis)
        grid = TimeGrid(0.0, 5.0, 6)
        states = spectral_evolve(H, psi0, grid)
        for t, state in zip(grid.times, states):
            expected = scipy.linalg.expm(-1j * t * H.matrix / H.energy_unit) @ psi0
            np.testing.assert_allclose(state, expected, atol=1e-10)

    def test_rejects_unnormalized_start(self, uniform_params, topology, make_basis):
        basis = make_basis(1)
        propagator = SpectralPropagator(build_hamiltonian(uniform_params, basis, topology))
        with pytest.raises(StateError):
            propagator.evolve(np.full(basis.dimension, 1.0), GRID)

    def test_conservation(self, uniform_params, topology, make_basis):
        basis = make_basis(2)
        H = build_hamiltonian(uniform_params, basis, topology)
        states = spectral_evolve(H, build_initial_state(InitialStateSpec.localized(1, 2), basis), GRID)
        report = conservation_report(H, states, basis)
        assert report.within(1e-10), report


class TestCorrelation:

    @pytest.fixture()
    def localized_run(self, uniform_params, topology):
        return evolve_initial_state(InitialStateSpec.localized(1, 2), GRID, uniform_params, topology)

    def test_initial_values(self, localized_run):
        states, basis = localized_run
        assert correlation((1, 1), states, basis, GRID.times).values[0] == pytest.approx(4.0)
        assert correlation((1, 7), states, basis, GRID.times).values[0] == pytest.approx(0.0, abs=1e-15)

    def test_values_are_real_and_non_negative(self, localized_run):
        states, basis = localized_run
        values = correlation((2, 5), states, basis, GRID.times).values
        assert values.dtype.kind == 'f'
        assert np.all(values >= 0.0)

    def test_mirror_symmetry(self, localized_run):
        states, basis = localized_run
        for site in range(2, 13):
            left = correlation((1, site), states, basis, GRID.times).values
            right = correlation((1, _mirror(site)), states, basis, GRID.times).values
            np.testing.assert_allclose(left, right, atol=1e-9)

    def test_opposite_cavity_dominates(self, localized_run):
        states, basis = localized_run
        ranking = dialogue_ranking(states, basis, GRID.times, reference=1)
        assert ranking[0][0] == 7
        assert all(peak < ranking[0][1] for _, peak in ranking[1:])

    def test_rejects_bad_shape(self, localized_run):
        states, basis = localized_run
        with pytest.raises(StateError):
            correlation((1, 7), states[:, :10], basis, GRID.times)

    def test_metrics(self):
        series = CorrelationSeries((1, 7), np.arange(7.0), np.array([0.0, 1e-8, 0.5, 0.2, 0.9, 0.1, 0.0]))
        assert series.peak == 0.9
        assert series.contrast == 0.9
        assert series.first_peak_time() == 2.0
        assert series.first_peak_time(floor=0.6) == 4.0
        assert series.first_peak_time(floor=1.0) is None


class TestInterference:

    @staticmethod
    def _contrast(phase, pair, params, topology):
        return correlation_run(InitialStateSpec.superposition(phase, (1, 7)), GRID, params, pair, topology)

    def test_phase_controls_symmetric_pair(self, uniform_params, topology):
        constructive = self._contrast(0.0, (4, 10), uniform_params, topology).contrast
        destructive = self._contrast(np.pi, (4, 10), uniform_params, topology).contrast
        assert constructive > destructive

    def test_suppressed_pair(self, uniform_params, topology):
        suppressed = self._contrast(0.0, (3, 9), uniform_params, topology).peak
        emitters = self._contrast(0.0, (1, 7), uniform_params, topology).peak
        assert suppressed < emitters

    def test_metadata_records_start_and_couplings(self, uniform_params, topology):
        series = self._contrast(np.pi, (4, 10), uniform_params, topology)
        assert series.metadata['pair'] == [4, 10]
        assert series.metadata['initial_state']['kind'] == 'superposition'
        assert series.metadata['couplings_over_hbar_OmegaR']['1-2'] == pytest.approx(1.0)


class TestCouplingDependence:

    def test_first_peak_moves_earlier_with_kappa(self, uniform_params, topology):
        grid = TimeGrid.with_step(15.0, 0.01)
        unit = uniform_params.energy_unit
        scan = first_peak_scan([kappa * unit for kappa in (0.6, 0.8, 1.0, 1.2, 1.4)], (1, 7),
                               InitialStateSpec.localized(1, 2), grid, uniform_params, topology)
        assert scan.kappas == pytest.approx((0.6, 0.8, 1.0, 1.2, 1.4))
        assert scan.decreasing, scan.times
        # G depends on kappa * t only
        assert scan.times[0] * 0.6 == pytest.approx(scan.times[-1] * 1.4, abs=0.02)

    def test_degenerate_disorder_equals_uniform_run(self, uniform_params, topology):
        unit = uniform_params.energy_unit
        grid = TimeGrid(0.0, 10.0, 501)
        spec = InitialStateSpec.localized(1, 2)
        disorder = DisorderSpec(kappa_low=unit, kappa_high=unit, master_seed=2, realizations=2)
        ensemble = disorder_correlation(spec, disorder, grid, uniform_params, (1, 7), topology)
        uniform = correlation_run(spec, grid, uniform_params, (1, 7), topology)
        for series in ensemble.realizations:
            np.testing.assert_allclose(series.values, uniform.values, atol=1e-12)
        np.testing.assert_allclose(ensemble.mean.values, uniform.values, atol=1e-12)

    def test_ensemble_order_is_independent_of_jobs(self, uniform_params, topology):
        unit = uniform_params.energy_unit
        grid = TimeGrid(0.0, 5.0, 101)
        spec = InitialStateSpec.localized(1, 2)
        disorder = DisorderSpec(kappa_low=0.5 * unit, kappa_high=1.5 * unit, master_seed=4, realizations=4)
        serial = disorder_correlation(spec, disorder, grid, uniform_params, (1, 7), topology, jobs=1)
        parallel = disorder_correlation(spec, disorder, grid, uniform_params, (1, 7), topology, jobs=3)
        for left, right in zip(serial.realizations, parallel.realizations):
            np.testing.assert_array_equal(left.values, right.values)
        frame = serial.frame()
        assert set(frame['realization']) == {-1, 0, 1, 2, 3}

    @pytest.mark.slow
    def test_ensemble_mean_smears_contrast(self, uniform_params, topology):
        unit = uniform_params.energy_unit
        spec = InitialStateSpec.localized(1, 2)
        disorder = DisorderSpec(kappa_low=0.5 * unit, kappa_high=1.5 * unit, master_seed=11, realizations=20)
        ensemble = disorder_correlation(spec, disorder, GRID, uniform_params, (1, 7), topology, jobs=0)
        midpoint = correlation_run(spec, GRID, uniform_params.with_couplings(
            {bond: disorder.midpoint for bond in topology.bonds}), (1, 7), topology)
        assert ensemble.mean.contrast < midpoint.contrast


def test_norm_drift_is_reported(uniform_params, topology, make_basis):
    basis = make_basis(1)
    propagator = SpectralPropagator(build_hamiltonian(uniform_params, basis, topology))
    propagator.energies = propagator.energies + 1e-3j
    with pytest.raises(NumericalError):
        propagator.evolve(build_initial_state(InitialStateSpec.localized(1, 1), basis), TimeGrid(0.0, 10.0, 11))
