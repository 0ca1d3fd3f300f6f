import pytest

import verify_system


@pytest.mark.parametrize('check', [
    verify_system.check_python_version,
    verify_system.check_dependencies,
    verify_system.check_settings,
    verify_system.check_fixtures,
    verify_system.check_model_gradients,
    verify_system.check_linearizing,
])
def test_check_passes(check):
    assert check() is True


def test_report_summarizes(capsys):
    assert verify_system.generate_report({'A': True, 'B': False}) is False
    out = capsys.readouterr().out
    assert 'Checks Passed: 1/2' in out
