import numpy as np
import pytest

from envpoison.mdp import Mdp

# (number, passed, detail) recorded by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_cycle():
    p = np.zeros((2, 1, 2))
    p[0, 0, 1] = p[1, 0, 0] = 1.0
    return Mdp(np.zeros((2, 1)), p)


def uniform_mdp(n_states, n_actions, rewards=None):
    p = np.full((n_states, n_actions, n_states), 1.0 / n_states)
    r = np.zeros((n_states, n_actions)) if rewards is None else rewards
    return Mdp(r, p)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
