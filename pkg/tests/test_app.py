import json

import pytest

import app


def test_check_command(fixture_path, capsys):
    assert app.main(['check', '--config', fixture_path('fhn.json')]) == 0
    assert 'LINEARIZING CHECK' in capsys.readouterr().out


def test_parse_error_exit_code(pendulum_config, write_config, capsys):
    pendulum_config['cost']['epsilon'] = 0.0
    assert app.main(['solve', '--config', write_config(pendulum_config)]) == 2
    out = capsys.readouterr().out
    assert 'ParseError' in out and 'exact0' in out


def test_missing_config_exit_code(tmp_path):
    assert app.main(['check', '--config', str(tmp_path / 'absent.json')]) == 2


def test_solve_sir_writes_kicks(fixture_path, tmp_path):
    out = tmp_path / 'sir'
    assert app.main(['solve', '--config', fixture_path('sir.json'), '--out', str(out)]) == 0
    kicks = json.loads((out / 'kicks.json').read_text())
    assert isinstance(kicks, list)
    assert len(kicks) == 2
    assert (out / 'trajectory.csv').exists()


def test_method_override(pendulum_config, write_config, tmp_path):
    path = write_config(pendulum_config)
    assert app.main(['solve', '--config', path, '--method', 'outer', '--out', str(tmp_path / 'o')]) == 0
    saved = json.loads((tmp_path / 'o' / 'config.json').read_text())
    assert saved['method'] == 'outer'


def test_feedback_needs_sample_interval(pendulum_config, write_config, capsys):
    assert app.main(['feedback', '--config', write_config(pendulum_config)]) == 2
    out = capsys.readouterr().out
    assert 'ParseError' in out and "field 'feedback.sample_dt'" in out


def test_sweep_command(pendulum_config, write_config, tmp_path):
    out = tmp_path / 'sweep'
    code = app.main(['sweep', '--config', write_config(pendulum_config), '--epsilon', '1e-2,5e-3',
                     '--out', str(out)])
    assert code == 0
    lines = (out / 'sweep.csv').read_text().splitlines()
    assert lines[0] == 'eps,layer_width,u_peak,interior_deviation,J'
    assert len(lines) == 3


def test_unknown_command():
    with pytest.raises(SystemExit):
        app.main(['launch'])
