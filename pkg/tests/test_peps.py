import numpy as np
import pytest
import scipy.linalg

from experiments.benchmark import benchmark_peps_vs_ed
from fock.spectrum import sector_ground_energy
from peps.checkpoint import load_checkpoint, save_checkpoint
from peps.contraction import contract_scalar
from peps.effective import (EnvironmentCache, LocalEigProblem, build_effective_pair, hamiltonian_for, number_moments,
                             peps_energy)
from peps.gevp import DENSE_LIMIT, solve_local_gevp
from peps.layout import SWEEP_ORDER
from peps.observables import peps_local_occupations, peps_readouts
from peps.operators import default_penalty, local_operators
from peps.state import PepsConfig, apply_bond_gauge, init_random, product_state, shift_gauge
from peps.statevector import peps_to_statevector, project_to_sector, statevector_energy
from peps.sweep import full_sweep, optimize, trace_frame
from utils.errors import CapacityError, ConfigurationError, ContractionError, SectorError, SingularEnvironmentError
from utils.randomizer import make_rng, uniform_complex

SMALL = PepsConfig(n_total=1, bond_cap=2)


def _site_expectation(vector: np.ndarray, operator: np.ndarray, site: int, d: int) -> complex:
    psi = vector.reshape((d,) * 12)
    moved = np.moveaxis(np.tensordot(operator, psi, axes=([1], [site - 1])), 0, site - 1)
    return np.vdot(psi, moved)


class TestConfig:

    def test_phys_dim_follows_photon_number(self):
        assert PepsConfig(n_total=2).phys_dim == 3
        with pytest.raises(ConfigurationError):
            PepsConfig(n_total=2, phys_dim=4)

    def test_bond_cap_range(self):
        assert PepsConfig(n_total=2).max_bond_dim == 9
        with pytest.raises(ConfigurationError):
            PepsConfig(n_total=1, bond_cap=5)

    def test_ring_and_chord_dimensions(self, topology):
        dims = PepsConfig(n_total=2).resolved_bond_dims(topology)
        assert dims[(2, 4)] == 9
        assert dims[(1, 2)] == 3

    def test_local_dimension_guard(self, topology):
        with pytest.raises(CapacityError):
            init_random(PepsConfig(n_total=3), topology)

    @pytest.mark.parametrize('eps', [0.0, 1.0, 2.5, -1e-10])
    def test_regularization_eps_range(self, eps):
        with pytest.raises(ConfigurationError):
            PepsConfig(n_total=1, regularization_eps=eps)


class TestContraction:

    def test_norm_matches_statevector_oracle(self, topology):
        for seed in range(100):
            state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=seed), topology)
            state.set_array(5, state.array(5) * 1.7)
            vector = peps_to_statevector(state)
            expected = np.vdot(vector, vector).real
            assert contract_scalar(state, state).real == pytest.approx(expected, rel=1e-10)

    def test_site_insertions_match_statevector_oracle(self, topology):
        state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=11), topology)
        vector = peps_to_statevector(state)
        ops = local_operators(2)
        for site in (1, 2, 7, 12):
            expected = _site_expectation(vector, ops['n'], site, 2)
            assert contract_scalar(state, state, {site: ops['n']}) == pytest.approx(expected, rel=1e-10)

    def test_number_moments(self, topology):
        state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=4), topology)
        vector = peps_to_statevector(state)
        totals = np.indices((2,) * 12).sum(axis=0).reshape(-1)
        weights = np.abs(vector) ** 2 / np.vdot(vector, vector).real
        mean, second = number_moments(state)
        assert mean == pytest.approx(weights @ totals, rel=1e-10)
        assert second == pytest.approx(weights @ totals ** 2, rel=1e-10)

    def test_mismatched_bond_names_the_bond(self, topology):
        state = init_random(SMALL, topology)
        state.tensors[1].data = np.zeros((2, 3, 2, 1, 1), dtype=np.complex128)
        with pytest.raises(ContractionError) as error:
            contract_scalar(state, state)
        assert error.value.bond == (1, 12)

    def test_statevector_guard(self, topology):
        state = product_state(PepsConfig(n_total=3), topology, {1: 3})
        with pytest.raises(CapacityError):
            peps_to_statevector(state)

    def test_sector_projection_of_product_state(self, topology, make_basis):
        state = product_state(PepsConfig(n_total=1, bond_cap=2), topology, {7: 1})
        basis = make_basis(1)
        amplitudes = project_to_sector(peps_to_statevector(state), basis)
        expected = np.zeros(basis.dimension, dtype=complex)
        expected[basis.lookup([1 if site == 7 else 0 for site in topology.sites])] = 1.0
        np.testing.assert_allclose(amplitudes, expected, atol=1e-12)
        with pytest.raises(SectorError):
            project_to_sector(peps_to_statevector(state), make_basis(2))

    def test_bond_gauge_leaves_state_unchanged(self, topology):
        state = init_random(PepsConfig(n_total=1, seed=2), topology)
        rng = make_rng(9)
        for bond in ((2, 4), (1, 2), (1, 12)):
            size = state.bond_dims[bond]
            gauge = np.eye(size) + 0.3 * rng.uniform(-1, 1, (size, size))
            gauged = apply_bond_gauge(state, bond, gauge)
            np.testing.assert_allclose(peps_to_statevector(gauged), peps_to_statevector(state), rtol=1e-10,
                                       atol=1e-12)

    def test_shift_gauge_leaves_state_unchanged(self, topology):
        state = init_random(PepsConfig(n_total=1, seed=2), topology)
        expected = peps_to_statevector(state)
        for site, target in ((1, 2), (2, 4), (7, 6), (12, 10)):
            assert shift_gauge(state, site, target)
            np.testing.assert_allclose(peps_to_statevector(state), expected, rtol=1e-10, atol=1e-12)
        # site 12 is now an isometry over its chord to site 10
        moved = np.moveaxis(state.array(12), 3, -1).reshape(-1, state.bond_dims[(10, 12)])
        np.testing.assert_allclose(moved.conj().T @ moved, np.eye(moved.shape[1]), atol=1e-12)
        with pytest.raises(ConfigurationError):
            shift_gauge(state, 1, 5)


class TestEffectiveProblem:

    def test_quadratic_forms_at_every_site(self, topology, uniform_params):
        state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=21), topology)
        vector = peps_to_statevector(state)
        norm = np.vdot(vector, vector).real
        functional = statevector_energy(vector, hamiltonian_for(state, uniform_params)) * norm
        for site in topology.sites:
            problem = build_effective_pair(state, uniform_params, site)
            tensor = state.array(site).ravel()
            assert np.vdot(tensor, problem.n_eff @ tensor).real == pytest.approx(norm, rel=1e-10)
            assert np.vdot(tensor, problem.h_eff @ tensor).real == pytest.approx(functional, rel=1e-10)

    def test_quadratic_forms_with_two_photon_levels(self, topology, uniform_params):
        state = init_random(PepsConfig(n_total=2, bond_cap=2, seed=17), topology)
        vector = peps_to_statevector(state)
        norm = np.vdot(vector, vector).real
        functional = statevector_energy(vector, hamiltonian_for(state, uniform_params)) * norm
        for site in (1, 2, 5, 12):
            problem = build_effective_pair(state, uniform_params, site)
            tensor = state.array(site).ravel()
            assert np.vdot(tensor, problem.n_eff @ tensor).real == pytest.approx(norm, rel=1e-10)
            assert np.vdot(tensor, problem.h_eff @ tensor).real == pytest.approx(functional, rel=1e-10)
            np.testing.assert_allclose(problem.n_eff, np.kron(np.eye(3), problem.norm_block))

    def test_cached_environments_follow_updates(self, topology, uniform_params):
        state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=6), topology)
        cache = EnvironmentCache(state, hamiltonian_for(state, uniform_params))
        rng = make_rng(13)
        # both sweep directions, with the turn at site 12
        for site in SWEEP_ORDER[4:20]:
            cached = build_effective_pair(state, uniform_params, site, cache)
            fresh = build_effective_pair(state, uniform_params, site)
            scale = np.abs(fresh.h_eff).max()
            np.testing.assert_allclose(cached.h_eff, fresh.h_eff, rtol=1e-10, atol=1e-12 * scale)
            np.testing.assert_allclose(cached.norm_block, fresh.norm_block, rtol=1e-10,
                                       atol=1e-12 * np.abs(fresh.norm_block).max())
            state.set_array(site, uniform_complex(rng, state.array(site).shape))

    def test_peps_energy_matches_statevector(self, topology, uniform_params):
        state = init_random(PepsConfig(n_total=2, bond_cap=2, seed=8), topology)
        expected = statevector_energy(peps_to_statevector(state), hamiltonian_for(state, uniform_params))
        assert peps_energy(state, uniform_params) == pytest.approx(expected, rel=1e-10)

    def test_default_penalty(self):
        assert default_penalty(10.0, 1.0, 4) == pytest.approx(28.0)
        assert default_penalty(0.0, 0.0, 4) == 1.0


class TestGevp:

    def test_matches_dense_generalized_solver(self):
        rng = make_rng(1)
        raw = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        h_eff = raw + raw.conj().T
        root = rng.normal(size=(8, 8))
        n_eff = root @ root.T + np.eye(8)
        xi, vector, deviation = solve_local_gevp(LocalEigProblem(1, h_eff, n_eff))
        expected = scipy.linalg.eigh(h_eff, n_eff, eigvals_only=True)[0]
        assert xi == pytest.approx(expected, rel=1e-10)
        assert np.vdot(vector, n_eff @ vector).real == pytest.approx(1.0, rel=1e-12)
        assert deviation <= 1e-8 * abs(xi)

    def test_drops_null_directions(self):
        n_eff = np.diag([1.0, 0.5, 1e-14, 0.0])
        h_eff = np.diag([3.0, 2.0, -50.0, -80.0])
        problem = LocalEigProblem(4, h_eff, n_eff)
        xi, vector, _ = solve_local_gevp(problem, eps=1e-10)
        assert xi == pytest.approx(3.0)
        assert problem.dropped_directions == 2
        assert problem.regularized
        assert abs(vector[2]) <= 1e-12 and abs(vector[3]) <= 1e-12

    def test_singular_environment(self):
        with pytest.raises(SingularEnvironmentError) as error:
            solve_local_gevp(LocalEigProblem(3, np.eye(2), np.zeros((2, 2))))
        assert error.value.site == 3

    def test_cutoff_keeping_nothing_is_singular(self):
        with pytest.raises(SingularEnvironmentError):
            solve_local_gevp(LocalEigProblem(1, np.eye(3), np.eye(3)), eps=1.0)

    @pytest.mark.parametrize('virtual', [6, DENSE_LIMIT // 3 + 20])
    def test_kronecker_norm_block(self, virtual):
        rng = make_rng(2, virtual)
        size = 3 * virtual
        raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
        h_eff = raw + raw.conj().T
        root = rng.normal(size=(virtual, virtual)) + 1j * rng.normal(size=(virtual, virtual))
        block = root @ root.conj().T + 0.1 * np.eye(virtual)
        n_eff = np.kron(np.eye(3), block)
        current = rng.normal(size=size) + 1j * rng.normal(size=size)
        problem = LocalEigProblem(1, h_eff, n_eff, norm_block=block, current=current)
        xi, vector, deviation = solve_local_gevp(problem)
        expected = scipy.linalg.eigh(h_eff, n_eff, eigvals_only=True)[0]
        assert xi == pytest.approx(expected, rel=1e-9)
        assert np.vdot(vector, n_eff @ vector).real == pytest.approx(1.0, rel=1e-10)
        assert deviation <= 1e-8 * abs(xi)
        assert problem.dropped_directions == 0
        assert problem.quotient(vector) <= problem.quotient(current)

    def test_dropped_directions_count_every_level(self):
        block = np.diag([2.0, 1.0, 0.0])
        problem = LocalEigProblem(2, np.kron(np.eye(2), np.diag([1.0, 4.0, -9.0])), np.kron(np.eye(2), block),
                                  norm_block=block)
        xi, _, _ = solve_local_gevp(problem)
        assert xi == pytest.approx(0.5)
        assert problem.dropped_directions == 2
        assert problem.condition_number == pytest.approx(2.0)


class TestReadouts:

    def test_product_state(self, topology, uniform_params):
        state = product_state(PepsConfig(n_total=2), topology, {1: 2})
        readouts = peps_readouts(state, uniform_params)
        assert readouts.functional_energy == pytest.approx(20.0, rel=1e-12)
        assert readouts.mean_number == pytest.approx(2.0)
        assert readouts.number_variance == pytest.approx(0.0, abs=1e-12)
        assert readouts.sector_weight == pytest.approx(1.0)
        assert readouts.sector_energy == pytest.approx(20.0, rel=1e-12)
        occupations = peps_local_occupations(state)
        assert occupations[1] == pytest.approx(2.0)
        assert sum(occupations.values()) == pytest.approx(2.0)


def test_checkpoint_round_trip(topology, tmp_path):
    state = init_random(PepsConfig(n_total=1, seed=5, number_penalty=3.0), topology)
    path = save_checkpoint(state, tmp_path / 'state.npz')
    loaded = load_checkpoint(path, topology)
    assert (loaded.config.n_total, loaded.config.seed, loaded.config.number_penalty) == (1, 5, 3.0)
    assert loaded.bond_dims == state.bond_dims
    for site in topology.sites:
        np.testing.assert_array_equal(loaded.array(site), state.array(site))


class TestOptimize:

    def test_single_photon_sweeps_descend(self, topology, uniform_params):
        config = PepsConfig(n_total=1, bond_cap=2, seed=3, max_sweeps=2)
        state, trace = optimize(config, uniform_params, topology)
        energies = trace.energies
        assert trace.records[0].sweep == 0
        assert np.all(np.diff(energies) <= 1e-9 * np.abs(energies[1:]))
        ed = uniform_params.reduced(sector_ground_energy(uniform_params, 1, topology))
        assert energies.min() >= ed - 1e-9
        frame = trace_frame(trace)
        assert list(frame.columns) == ['sweep', 'energy_over_hbar_OmegaR', 'delta_E', 'max_deviation',
                                       'regularized_solves']

    def test_single_sweep_visits_both_directions(self, topology, uniform_params):
        state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=5), topology)
        start = peps_energy(state, uniform_params)
        state, record = full_sweep(state, uniform_params)
        assert record.sweep == 1
        assert record.reinitialized_sites == ()
        assert len(record.site_energies) == 24
        assert record.energy <= start + 1e-9 * abs(start)
        ed = uniform_params.reduced(sector_ground_energy(uniform_params, 1, topology))
        assert record.energy >= ed - 1e-9

    def test_seed_reproducibility(self, topology, uniform_params):
        config = PepsConfig(n_total=1, bond_cap=2, seed=3, max_sweeps=1)
        first = optimize(config, uniform_params, topology)[1].energies
        second = optimize(config, uniform_params, topology)[1].energies
        np.testing.assert_array_equal(first, second)

    def test_sweeps_never_raise_energy(self, topology, uniform_params, test_logger):
        config = PepsConfig(n_total=1, seed=3, max_sweeps=10, convergence_tol=1e-12)
        _, trace = optimize(config, uniform_params, topology)
        energies = trace.energies
        test_logger(f'{trace.regularized_solves} regularized solves over {trace.sweeps} sweeps')
        assert np.all(np.diff(energies) <= 1e-9 * np.abs(energies[1:]))
        for record in trace.records[1:]:
            site_energies = np.array(record.site_energies)
            assert np.all(np.diff(site_energies) <= 1e-9 * np.abs(site_energies[1:])), f'sweep {record.sweep}'

    def test_rejected_solutions_keep_the_state(self, topology, uniform_params, monkeypatch):
        def highest(problem, eps):
            flipped = LocalEigProblem(problem.site, -problem.h_eff, problem.n_eff, problem.norm_block,
                                      problem.current)
            xi, vector, deviation = solve_local_gevp(flipped, eps)
            problem.dropped_directions = flipped.dropped_directions
            problem.condition_number = flipped.condition_number
            return -xi, vector, deviation

        monkeypatch.setattr('peps.sweep.solve_local_gevp', highest)
        state = init_random(PepsConfig(n_total=1, bond_cap=2, seed=5), topology)
        before = peps_to_statevector(state)
        start = peps_energy(state, uniform_params)
        state, record = full_sweep(state, uniform_params)
        assert record.kept_tensors == len(SWEEP_ORDER)
        assert record.energy == pytest.approx(start, rel=1e-10)
        np.testing.assert_allclose(peps_to_statevector(state), before, rtol=1e-9, atol=1e-12)

    def test_zero_coupling_converges_immediately(self, topology, make_params):
        params = make_params(kappa=0.0)
        config = PepsConfig(n_total=1, bond_cap=2, seed=3, max_sweeps=2)
        _, trace = optimize(config, params, topology)
        assert trace.converged
        assert trace.sweeps <= 2
        assert trace.final_energy == pytest.approx(10.0, rel=1e-8)

    def test_seeds_agree_on_the_ground_energy(self, topology, uniform_params):
        finals = []
        for seed in (3, 4):
            config = PepsConfig(n_total=1, bond_cap=2, seed=seed, max_sweeps=150, convergence_tol=1e-11)
            finals.append(optimize(config, uniform_params, topology)[1].final_energy)
        assert finals[0] == pytest.approx(finals[1], rel=1e-6)

    def test_uniform_coupling_occupations(self, topology, uniform_params, test_logger):
        config = PepsConfig(n_total=1, bond_cap=2, seed=4, max_sweeps=150, convergence_tol=1e-12)
        state, trace = optimize(config, uniform_params, topology)
        occupations = peps_local_occupations(state)
        inner = np.array([occupations[site] for site in topology.inner_sites])
        outer = np.array([occupations[site] for site in topology.outer_sites])
        test_logger(f'After {trace.sweeps} sweeps: inner spread {np.ptp(inner):.3e}, outer spread {np.ptp(outer):.3e}')
        assert np.ptp(inner) <= 1e-5
        assert np.ptp(outer) <= 1e-5
        assert inner.min() > outer.max()
        assert sum(occupations.values()) == pytest.approx(1.0, abs=1e-6)

    def test_two_photon_sector_projection(self, topology, make_params):
        params = make_params(kappa=0.0)
        config = PepsConfig(n_total=2, bond_cap=2, seed=5, max_sweeps=6, convergence_tol=1e-10)
        state, trace = optimize(config, params, topology)
        readouts = peps_readouts(state, params)
        assert trace.final_energy == pytest.approx(20.0, rel=1e-8)
        assert readouts.sector_weight == pytest.approx(1.0, abs=1e-8)
        assert readouts.sector_energy == pytest.approx(readouts.functional_energy, rel=1e-8)
        assert sum(peps_local_occupations(state).values()) == pytest.approx(2.0, abs=1e-6)

    @pytest.mark.slow
    def test_single_photon_reaches_ed(self, topology, uniform_params, test_logger):
        config = PepsConfig(n_total=1, seed=3, max_sweeps=40, convergence_tol=1e-10)
        state, trace = optimize(config, uniform_params, topology)
        ed = uniform_params.reduced(sector_ground_energy(uniform_params, 1, topology))
        test_logger(f'N=1 after {trace.sweeps} sweeps: PEPS {trace.best_energy:.12g}, ED {ed:.12g}')
        assert trace.best_energy == pytest.approx(ed, rel=1e-4)

    @pytest.mark.slow
    def test_two_photons_at_exact_bond_dimension(self, topology, uniform_params, soft_assert, test_logger):
        config = PepsConfig(n_total=2, seed=7, max_sweeps=15, convergence_tol=1e-8)
        state, trace = optimize(config, uniform_params, topology)
        ed = uniform_params.reduced(sector_ground_energy(uniform_params, 2, topology))
        energies = trace.energies
        test_logger(f'N=2 after {trace.sweeps} sweeps in {trace.wall_time:.0f} s: PEPS {trace.best_energy:.12g}, '
                    f'ED {ed:.12g}')
        soft_assert.expect(trace.best_energy == pytest.approx(ed, rel=1e-4), 'peps-matches-ed',
                           detail=f'{trace.best_energy} vs {ed}')
        soft_assert.expect(bool(np.all(np.diff(energies) <= 1e-9 * np.abs(energies[1:]))), 'monotone-sweeps')
        for record in trace.records[1:]:
            soft_assert.expect(record.max_conditioned_deviation <= 1e-8 * abs(record.energy), 'gevp-deviation',
                               detail=f'sweep {record.sweep}: {record.max_conditioned_deviation:.3e}')

    @pytest.mark.slow
    def test_three_photons_capped_stay_above_ed(self, topology, uniform_params, test_logger):
        report = benchmark_peps_vs_ed([3], uniform_params, topology, seed=1, max_sweeps=10, ed_n_values=[1, 2, 3])
        row = report.rows[0]
        test_logger(f'N=3 at D={row.bond_dim}: PEPS {row.peps_energy:.12g} above ED by {row.difference:.3e}')
        assert row.bond_dim == 6
        assert row.difference > 1e-8
        assert report.violations == []
