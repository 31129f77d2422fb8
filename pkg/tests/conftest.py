import numpy as np
import pytest

from stochsoliton import acceptance


@pytest.fixture(scope="session")
def ws():
    """Shared lazy workspace; heavy artifacts are built once per session."""
    return acceptance.workspace()


@pytest.fixture(scope="session")
def grid(ws):
    return ws.grid()


@pytest.fixture(scope="session")
def Q(ws):
    return ws.Q()


@pytest.fixture(scope="session")
def eig(ws):
    """Eigenpair solved on the coarser sub-grid, upsampled to the main grid."""
    return ws.eig_main()


@pytest.fixture(scope="session")
def eig_coarse(ws):
    return ws.eig_at(1024)


@pytest.fixture(scope="session")
def Q_coarse(ws):
    return ws.Q_at(1024)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
