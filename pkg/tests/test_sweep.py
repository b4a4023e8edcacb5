import copy

import numpy as np
import pytest

from core.config import EXPERIMENT_DEFAULTS
from core.errors import ConfigError
from core.sweep import CnnGapSweep, FcnGapSweep, layer_norm_scaling


def _fcn_params(**overrides):
    params = copy.deepcopy(EXPERIMENT_DEFAULTS['fcn-sweep'])
    params.update(depth=3, d_in=4, d_out=3, widths=[16, 32], trials=4, sup_samples=50)
    params.update(overrides)
    return params


def _cnn_params(**overrides):
    params = copy.deepcopy(EXPERIMENT_DEFAULTS['cnn-sweep'])
    params.update(d_in=2, d_out=3, p=5, q=2, widths=[4, 6], alpha=0.5, trials=3, sup_samples=20)
    params.update(overrides)
    return params


class TestFcnGapSweep:

    def test_rows_and_summary(self):
        report = FcnGapSweep(_fcn_params(), 11, workers=1).run()
        assert report.kind == 'fcn'
        assert len(report.rows) == 2 * (4 + 1)
        assert [s['width'] for s in report.summary] == [16, 32]
        trial = next(r for r in report.rows if r['trial'] != 'control')
        for key in ('norm_1', 'norm_2', 'norm_3', 'diff_norm_2', 'spread_2', 'gap', 'bound', 'counts'):
            assert key in trial
        # one internal layer of 16 x 16, floor(256^0.5)
        assert report.rows[0]['counts'] == [0, 16, 0]
        assert report.summary[0]['gap_median'] <= report.summary[0]['gap_max']

    def test_control_rows_have_zero_gap(self):
        report = FcnGapSweep(_fcn_params(), 12, workers=1).run()
        controls = [r for r in report.rows if r['trial'] == 'control']
        assert len(controls) == 2
        assert all(r['gap'] == 0.0 for r in controls)

    def test_checks_listed(self):
        report = FcnGapSweep(_fcn_params(), 13, workers=1).run()
        names = [c.name for c in report.checks]
        assert names == ['median-gap-decreasing', 'diff-bound-rate-d16', 'diff-bound-rate-d32']

    def test_deterministic_across_workers(self):
        one = FcnGapSweep(_fcn_params(scheme='random-without-replacement'), 14, workers=1).run()
        three = FcnGapSweep(_fcn_params(scheme='random-without-replacement'), 14, workers=3).run()
        assert one.rows == three.rows
        assert one.summary == three.summary

    def test_seeds_recorded(self):
        report = FcnGapSweep(_fcn_params(trials=2), 15, workers=1).run()
        streams = [r['stream_index'] for r in report.rows if r['trial'] != 'control']
        assert streams == [0, 1, 2, 3]
        assert all(r['base_seed'] == 15 for r in report.rows)

    def test_random_scheme_alpha_constraint(self):
        with pytest.raises(ConfigError):
            FcnGapSweep(_fcn_params(scheme='random-with-replacement', alpha=0.9), 1).run()

    def test_alpha_range(self):
        with pytest.raises(ConfigError):
            FcnGapSweep(_fcn_params(alpha=1.0), 1).run()

    def test_rejects_filter_scheme_and_shallow_depth(self):
        with pytest.raises(ConfigError):
            FcnGapSweep(_fcn_params(scheme='filter-random'), 1)
        with pytest.raises(ConfigError):
            FcnGapSweep(_fcn_params(depth=2), 1)


class TestCnnGapSweep:

    def test_rows_and_dft_agreement(self):
        report = CnnGapSweep(_cnn_params(), 21, workers=1).run()
        assert report.kind == 'cnn'
        assert len(report.rows) == 2 * (3 + 1)
        trial = report.rows[0]
        # floor(4^1.5) filters in the middle layer
        assert trial['counts'] == [0, 8, 0]
        assert trial['norm_1_explicit'] == pytest.approx(trial['norm_1'], rel=1e-6)
        assert trial['diff_norm_2_explicit'] == pytest.approx(trial['diff_norm_2'], rel=1e-6)
        assert all(s['dft_deviation_max'] <= 1e-6 for s in report.summary)

    def test_layer_norm_scaling_records(self):
        report = CnnGapSweep(_cnn_params(scaling_tol=0.3), 22, workers=1).run()
        layer_checks = [c for c in report.checks if c.name.startswith('layer-norm-scaling')]
        assert [c.name for c in layer_checks] == ['layer-norm-scaling-d4', 'layer-norm-scaling-d6']
        assert all(c.satisfied for c in layer_checks)
        fit = report.summary[0]['C3_fit']
        # q^2 / p = 4 / 5
        assert fit == pytest.approx(np.mean([s['internal_norm_mean'] for s in report.summary]) * 5 / 4)
        for s in report.summary:
            assert s['norm_ratio'] == pytest.approx(s['internal_norm_mean'] * 5 / 4)
            assert s['layer_norm_bound'] == pytest.approx(fit * 4 / 5)

    def test_layer_norm_scaling_flags_drift(self):
        summary = [{'width': 8, 'internal_norm_mean': 0.8, 'norm_ratio': 1.0},
                   {'width': 16, 'internal_norm_mean': 1.6, 'norm_ratio': 2.0}]
        checks = layer_norm_scaling(summary, 5, 2, 0.25)
        assert [c.satisfied for c in checks] == [False, False]
        assert summary[0]['C3_fit'] == pytest.approx(1.5)
        steady = [{'width': 8, 'internal_norm_mean': 0.8, 'norm_ratio': 1.0},
                  {'width': 16, 'internal_norm_mean': 0.84, 'norm_ratio': 1.05}]
        assert all(c.satisfied for c in layer_norm_scaling(steady, 5, 2, 0.25))

    def test_control_rows(self):
        report = CnnGapSweep(_cnn_params(widths=[4]), 23, workers=1).run()
        controls = [r for r in report.rows if r['trial'] == 'control']
        assert [r['gap'] for r in controls] == [0.0]

    def test_explicit_limit(self):
        report = CnnGapSweep(_cnn_params(widths=[4], explicit_limit=10), 24, workers=1).run()
        assert 'norm_1_explicit' not in report.rows[0]

    def test_alpha_constraint(self):
        with pytest.raises(ConfigError):
            CnnGapSweep(_cnn_params(alpha=0.7), 1).run()

    def test_feature_size(self):
        with pytest.raises(ConfigError):
            CnnGapSweep(_cnn_params(p=2, q=2), 1)
