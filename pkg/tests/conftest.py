import numpy as np
import pytest

from mhrt.model import ItemParams, ObservedData, PersonParams
from mhrt.sampler import ChainState, Workspace

# filled by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_toy_state(responses, rts, theta, tau, sigma_person, d, xi, omega,
                   mu_d=0.0, mu_xi=4.3, sigma_item=None, q_ability=None,
                   q_speed=None, proposal_sd=0.5):
    """Hand-built state and workspace for single-update tests."""
    data = ObservedData(np.asarray(responses, dtype=float),
                        np.asarray(rts, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    n_items = data.n_items
    if q_ability is None:
        q_ability = np.ones((n_items, theta.shape[1]))
    if q_speed is None:
        q_speed = np.ones((n_items, tau.shape[1]))
    persons = PersonParams(theta, tau, np.asarray(sigma_person, dtype=float))
    items = ItemParams(np.asarray(d, dtype=float), np.asarray(xi, dtype=float),
                       np.asarray(omega, dtype=float), mu_d, mu_xi,
                       np.eye(2) if sigma_item is None else np.asarray(sigma_item))
    state = ChainState(persons, items,
                       theta_sd=np.full(theta.shape, proposal_sd),
                       d_sd=np.full(n_items, proposal_sd))
    return state, Workspace(data, q_ability, q_speed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
