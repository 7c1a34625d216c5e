import numpy as np
import pandas as pd
import pytest

from utils.concurrency import ordered_map, resolve_workers
from utils.data_helper import config_hash, read_csv, read_csv_metadata, write_csv, write_json
from utils.errors import CapacityError, ConfigurationError, ContractionError, KagomeError, ManifestParseError
from utils.randomizer import make_rng, uniform_complex, uniform_couplings
from utils.soft_assert import SoftAssertContextManager, Violation


class TestSoftAssert:

    def test_collects_failures(self):
        checker = SoftAssertContextManager()
        assert checker.expect(True, 'fine')
        assert not checker.expect(False, 'degree', (2, 4), 'deg(2)=3')
        with checker:
            assert 1 == 2, 'broken'
        failures = checker.get_failures()
        assert len(failures) == 2
        assert failures[0] == Violation('degree', (2, 4), 'deg(2)=3')
        assert str(failures[0]) == 'degree [2,4] deg(2)=3'
        assert failures[1].invariant == 'assertion'

    def test_other_exceptions_propagate(self):
        with pytest.raises(KeyError):
            with SoftAssertContextManager():
                raise KeyError('x')


def test_exit_codes_follow_error_classes():
    assert ManifestParseError.exit_code.value == 2
    assert ConfigurationError.exit_code.value == 3
    assert CapacityError.exit_code.value == 4
    assert KagomeError.exit_code.value == 5
    assert ContractionError('bad', bond=(1, 2)).bond == (1, 2)


class TestArtifacts:

    def test_csv_metadata_and_body(self, tmp_path):
        frame = pd.DataFrame({'t': [0.0, 0.5], 'G': [1.0 / 3.0, 2.0]})
        path = write_csv(tmp_path / 'out' / 'table.csv', frame, {'kind': 'dynamics', 'pair': [1, 7]})
        lines = path.read_text(encoding='utf-8').splitlines()
        assert lines[:3] == ['# kind: dynamics', '# pair: [1,7]', 't,G']
        assert read_csv_metadata(path) == {'kind': 'dynamics', 'pair': '[1,7]'}
        pd.testing.assert_frame_equal(read_csv(path), frame)

    def test_no_temporary_files_left(self, tmp_path):
        write_json(tmp_path / 'record.json', {'value': np.float64(1.5), 'array': np.arange(3)})
        assert [item.name for item in tmp_path.iterdir()] == ['record.json']

    def test_config_hash_ignores_key_order(self):
        assert config_hash({'a': 1, 'b': [1, 2]}) == config_hash({'b': [1, 2], 'a': 1})
        assert config_hash({'a': 1}) != config_hash({'a': 2})


class TestRandomizer:

    def test_streams_are_reproducible_and_distinct(self):
        assert make_rng(3, 1).random() == make_rng(3, 1).random()
        assert make_rng(3, 1).random() != make_rng(3, 2).random()

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            make_rng(-1)

    def test_uniform_complex_range(self):
        values = uniform_complex(make_rng(0), (200,))
        assert np.all(np.abs(values.real) <= 1) and np.all(np.abs(values.imag) <= 1)
        assert np.any(values.imag != 0)

    def test_degenerate_interval(self):
        np.testing.assert_array_equal(uniform_couplings(make_rng(0), 0.7, 0.7, 4), np.full(4, 0.7))


class TestConcurrency:

    def test_resolve_workers(self):
        assert resolve_workers(4, 2) == 2
        assert resolve_workers(1, 10) == 1
        assert 1 <= resolve_workers(None, 100) <= 8
        assert resolve_workers(0, 1) == 1

    def test_results_keep_input_order(self):
        assert ordered_map(lambda value: value * value, range(20), jobs=4) == [value * value for value in range(20)]
