import json

import pytest

from core.config import WORKERS_ENV
from ui.cli import COMMANDS, build_parser, main


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


def test_every_kind_has_a_subcommand():
    parser = build_parser()
    for kind in COMMANDS:
        assert parser.parse_args([kind]).kind == kind


@pytest.mark.parametrize("argv", [[], ['table4'], ['table2', '--format', 'xml'], ['table2', '--seed', 'abc']])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert 'prunebound' in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path):
    assert main(['table2', '--config', str(tmp_path / "absent.json")]) == 1


def test_bad_worker_count_exits_1(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, '0')
    assert main(['circulant-equiv', '--trials', '2']) == 1


def test_csv_report_to_file(tmp_path, write_config):
    out = tmp_path / "report.csv"
    path = write_config({'instances': 3})
    assert main(['circulant-equiv', '--config', path, '--seed', '5', '--out', str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == '# kind=circulant-equiv'
    assert lines[1] == '# seed=5'
    assert '# instances=3' in lines
    assert '# adjusted=[]' in lines
    assert any(line.startswith('# check circulant-forward: ') and line.endswith(' ok') for line in lines)
    table = [line for line in lines if not line.startswith('#')]
    assert table[0].startswith('instance,d_in,d_out,p,q,forward_error,')
    assert len(table) == 4


def test_json_report_to_stdout(capsys):
    assert main(['circulant-equiv', '--trials', '2', '--format', 'json', '--seed', '8']) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc['config']['kind'] == 'circulant-equiv'
    assert doc['config']['seed'] == 8
    assert doc['config']['params']['instances'] == 2
    assert len(doc['rows']) == 2
    assert doc['summary']['passed'] is True
    assert {c['name'] for c in doc['summary']['checks']} == {'circulant-forward', 'circulant-norm'}


def test_failed_check_exits_2_after_writing(tmp_path, write_config):
    out = tmp_path / "report.csv"
    path = write_config({'instances': 2, 'norm_tol': -1.0})
    assert main(['circulant-equiv', '--config', path, '--out', str(out)]) == 2
    assert '# check circulant-norm: ' in out.read_text()
    assert 'FAILED' in out.read_text()


def test_check_disabled_exits_0(tmp_path, write_config):
    path = write_config({'rows': [[16, 'normal-1', None]], 'trials': 100, 'cap': 0.01, 'check': False})
    assert main(['table3', '--config', path, '--out', str(tmp_path / "t3.csv")]) == 0


def test_same_bytes_for_any_worker_count(tmp_path, write_config, monkeypatch):
    path = write_config({'rows': [[8, 8, 1.0], [8, 12, 1.7320508075688772]], 'trials': 120})
    reports = []
    for workers in ('1', '4'):
        monkeypatch.setenv(WORKERS_ENV, workers)
        out = tmp_path / f"table2-{workers}.csv"
        assert main(['table2', '--config', path, '--seed', '3', '--out', str(out)]) == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]


def test_bounds_records_adjustments(capsys, write_config):
    path = write_config({'c1': 0.6, 'width': 4096})
    assert main(['bounds', '--config', path, '--format', 'json']) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [r['guarantee'] for r in doc['rows']] == ['magnitude-fcn', 'random-fcn', 'filter-cnn']
    assert doc['adjusted'][0].startswith('K1=')


def test_table_columns_then_seed(tmp_path, write_config):
    out = tmp_path / "t2.csv"
    path = write_config({'rows': [[8, 8, 1.0]], 'trials': 100, 'quantiles': [0.95]})
    assert main(['table2', '--config', path, '--seed', '4', '--out', str(out)]) == 0
    lines = out.read_text().splitlines()
    assert '# seed column: per-row stream label base:stream[.substream]' in lines
    table = [line for line in lines if not line.startswith('#')]
    assert table[0] == 'n1,n2,K,mean,std,q,c0,delta0,seed'
    assert table[1].endswith(',4:0')
