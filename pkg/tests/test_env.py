import pytest
from deepbf.env import ENV_THREADS, get_env_int, num_threads

@pytest.mark.parametrize('value, expected', [('4', 4), (' 2 ', 2), ('', 7), ('many', 7), ('1.5', 7), ('-3', -3)])
def test_get_env_int(value, expected):
    assert get_env_int('X', 7, {'X' : value}) == expected

def test_get_env_int_missing_key():
    assert get_env_int('X', 7, {}) == 7

@pytest.mark.parametrize('value, expected', [(None, 1), ('3', 3), ('0', 1), ('-2', 1), ('lots', 1)])
def test_num_threads(monkeypatch, value, expected):
    if value is None:
        monkeypatch.delenv(ENV_THREADS, raising = False)
    else:
        monkeypatch.setenv(ENV_THREADS, value)
    assert num_threads() == expected
