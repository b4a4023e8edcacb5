import json

import pytest

from core.config import DEFAULT_SEED, EXPERIMENT_DEFAULTS
from core.errors import AcceptanceError, ConfigError
from core.experiment import (ExperimentConfig, ExperimentReport, canonical_kind, require_passed, resolve_config,
                             run_experiment, run_oracle_suite)
from core.theory import BoundReport, thm3_alpha_constraint


@pytest.fixture
def config_file(tmp_path):
    def write(doc):
        path = tmp_path / "config.json"
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(path)
    return write


class TestResolveConfig:

    def test_defaults(self):
        config = resolve_config('table2')
        assert config.kind == 'table2'
        assert config.seed == DEFAULT_SEED
        assert config.fmt == 'csv' and config.out is None
        assert config.params == EXPERIMENT_DEFAULTS['table2']
        assert config.params is not EXPERIMENT_DEFAULTS['table2']

    def test_aliases(self):
        assert canonical_kind('fcn-gap-sweep') == 'fcn-sweep'
        assert resolve_config('cnn-gap-sweep').kind == 'cnn-sweep'

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            resolve_config('table4')

    def test_file_then_overrides(self, config_file):
        path = config_file({'kind': 'table2', 'seed': 7, 'trials': 300, 'format': 'json', 'mean_tol': 1})
        config = resolve_config('table2', path)
        assert (config.seed, config.fmt, config.params['trials']) == (7, 'json', 300)
        assert config.params['mean_tol'] == 1.0
        config = resolve_config('table2', path, seed=9, trials=200, fmt='csv')
        assert (config.seed, config.fmt, config.params['trials']) == (9, 'csv', 200)

    @pytest.mark.parametrize("doc", [
        {'trial_count': 5},
        {'trials': 'ten'},
        {'trials': 10.5},
        {'check': 1},
        {'trials': True},
        {'trials': 0},
        {'seed': -3},
        {'format': 'xml'},
        {'kind': 'table3'},
        {'rows': [[32, 32]]},
    ])
    def test_rejected_documents(self, config_file, doc):
        with pytest.raises(ConfigError):
            resolve_config('table2', config_file(doc))

    @pytest.mark.parametrize("text", ['{"trials": ', '[1, 2]'])
    def test_malformed_files(self, config_file, text):
        with pytest.raises(ConfigError):
            resolve_config('table2', config_file(text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_config('table2', str(tmp_path / "absent.json"))

    def test_trials_key_per_kind(self):
        assert resolve_config('circulant-equiv', trials=4).params['instances'] == 4
        assert resolve_config('bounds', trials=150).params['latala_trials'] == 150
        with pytest.raises(ConfigError):
            resolve_config('oracle-suite', trials=10)

    def test_sweep_validation(self, config_file):
        with pytest.raises(ConfigError):
            resolve_config('fcn-sweep', config_file({'scheme': 'lottery'}))
        with pytest.raises(ConfigError):
            resolve_config('cnn-sweep', config_file({'widths': []}))
        with pytest.raises(ConfigError):
            resolve_config('table3', config_file({'rows': [[32, 'laplace', None]]}))

    def test_bad_worker_environment(self, monkeypatch):
        monkeypatch.setenv('PRUNEBOUND_WORKERS', 'many')
        with pytest.raises(ConfigError):
            resolve_config('table2')


class TestRunners:

    def _config(self, kind, seed=5, **params):
        config = resolve_config(kind, seed=seed)
        config.params.update(params)
        return config

    def test_order_stats(self):
        report = run_experiment(self._config('order-stats', cases=[[4, 1, 1], [8, 8, 2]], trials=4000, sigma=4.0))
        assert [r['exact_fraction'] for r in report.rows] == ['1/15', '2/3']
        assert report.passed
        assert any(c.name == 'order-n4-r1-p1-closed-form' for c in report.checks)

    def test_balls_bins(self):
        report = run_experiment(self._config('balls-bins', cases=[[4, 8], [16, None]], trials=3000, sigma=4.0))
        assert [(r['n'], r['N']) for r in report.rows] == [(4, 8), (16, 45)]
        assert report.rows[0]['exact'] == pytest.approx(1 - 100 / 65536)
        assert report.passed

    def test_circulant_equiv(self):
        report = run_experiment(self._config('circulant-equiv', instances=6))
        assert len(report.rows) == 6
        assert all(2 <= r['p'] <= 8 and 1 <= r['q'] < r['p'] for r in report.rows)
        assert report.passed

    def test_table2_unpublished_row(self):
        report = run_experiment(self._config('table2', rows=[[16, 16, 1.0]], trials=100))
        assert [r['q'] for r in report.rows] == EXPERIMENT_DEFAULTS['table2']['quantiles']
        assert report.checks == []

    def test_table3_rows(self):
        report = run_experiment(self._config('table3', rows=[[16, 'normal-3', None], [16, 'zero', None]],
                                             trials=100))
        assert [r['dist'] for r in report.rows] == ['normal-3', 'zero']
        assert [c.name for c in report.checks] == ['table3-d16-normal-3-latala', 'table3-d16-zero-latala']
        assert report.passed

    def test_bounds_with_given_c1(self):
        config = self._config('bounds', c1=1.0)
        report = run_experiment(config)
        assert [r['guarantee'] for r in report.rows] == ['magnitude-fcn', 'random-fcn', 'filter-cnn']
        assert config.adjusted == ['K1=0.3333333333333333', 'K2=0.2', 'N=[1.0, 1.0, 1.0]', 'deltas=[0.0, 0.0, 0.0]']
        assert report.rows[2]['alpha_max'] == pytest.approx(thm3_alpha_constraint(10 ** 6))
        # alpha=0.6 sits just above the random-pruning limit at d=10^6
        assert report.rows[1]['alpha_max'] == pytest.approx(0.59503, abs=1e-4)
        assert not report.rows[1]['alpha_ok']
        assert report.rows[1]['probability'] == pytest.approx(0.99 ** 2 * (1 - (2 + 0.2 ** 0.25) * 10 ** -0.9), rel=1e-9)

    def test_bounds_estimates_c1(self):
        config = self._config('bounds', latala_d=16)
        run_experiment(config)
        assert config.adjusted[0].startswith('c1=')
        assert config.params['c1'] is None

    @pytest.mark.slow
    def test_oracle_suite(self):
        config = self._config('oracle-suite', order_trials=5000, balls_trials=3000, circulant_instances=4, sigma=4.0)
        report = run_oracle_suite(config)
        assert report.summary == [{'checks': len(report.checks), 'failed': 0}]
        names = {c.name for c in report.checks}
        assert {'balls-n4-N8-enumeration', 'filter-alpha-d128', 'filter-alpha-d1024', 'circulant-norm'} <= names


class TestRequirePassed:

    def _report(self, ok):
        checks = [BoundReport.check('a', 1.0, 2.0), BoundReport.check('b', 3.0, 4.0 if ok else 2.0)]
        return ExperimentReport('table2', checks=checks)

    def test_raises_on_failure(self):
        config = ExperimentConfig('table2', {'check': True})
        with pytest.raises(AcceptanceError) as info:
            require_passed(config, self._report(False))
        assert info.value.exit_code == 2
        assert [c.name for c in info.value.failures] == ['b']
        assert 'b' in str(info.value)

    def test_passes(self):
        require_passed(ExperimentConfig('table2', {'check': True}), self._report(True))

    def test_check_disabled(self):
        require_passed(ExperimentConfig('table2', {'check': False}), self._report(False))
