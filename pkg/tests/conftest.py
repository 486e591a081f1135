import numpy as np
import pytest
from hypothesis import settings

import relaysim as rs

settings.register_profile("suite", deadline=None, max_examples=50, derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def ws():
    return rs.Workspace(bounds=((0.0, 30.0), (0.0, 30.0)),
                        relay_region=((0.0, 30.0), (12.0, 18.0)),
                        cell=1.0, p_s=(15.0, 0.0), p_d=(15.0, 30.0))


@pytest.fixture(scope="session")
def prm():
    return rs.ChannelParams(ell=3.0, rho=20.0, sigma_xi2=20.0, eta2=50.0,
                            beta=10.0, gamma=5.0, delta=1.0, eps_mf=1.0)


@pytest.fixture(scope="session")
def radio():
    return rs.RadioParams(p0=25.0, pc=25.0, sigma2=1.0, sigma_d2=1.0)


def random_cells(ws, rng, n):
    cells = ws.relay_cells()
    return cells[rng.choice(len(cells), size=n, replace=False)]


def random_trajectory(ws, rng, n_slots, n_relays):
    return np.stack([random_cells(ws, rng, n_relays) for _ in range(n_slots)])


def random_posterior(rng, spread=3.0):
    mu = rng.uniform(-45.0, -5.0, size=2)
    a = rng.uniform(-1.0, 1.0, size=(2, 2))
    cov = a @ a.T + 0.05 * np.eye(2)
    cov *= spread / np.linalg.eigvalsh(cov).max()
    return rs.Posterior2(mu=mu, cov=cov)
