import numpy as np
import pytest

from quadgpe import Grid, Modulated, QuadraticModel, gaussian_state

W1 = np.diag([0.0, 1.0])


def free_model(kappa=0.0, **kw):
    return QuadraticModel(n=1, kappa=kappa, Hzz=np.diag([1.0, 0.0]), **kw)


def harmonic_model(kappa=0.0, **kw):
    return QuadraticModel(n=1, kappa=kappa, Hzz=np.eye(2), **kw)


def modulated_model(kappa=0.0, **kw):
    return QuadraticModel(n=1, kappa=kappa, Hzz=Modulated(np.diag([1.0, 0.0]), 1.0, 0.1, 2.0), **kw)


def nonlocal_model(kappa=0.3):
    """Harmonic trap with unit position blocks in every kernel matrix."""
    return QuadraticModel(n=1, kappa=kappa, Hzz=np.eye(2), Wzz=W1, Wzw=W1, Www=W1)


def chirped_gamma():
    return gaussian_state(1, Q=0.2 + 1.5j, center=[0.3, 1.0])


@pytest.fixture
def grid1d():
    return Grid.uniform(1, -16.0, 16.0, 1024)


@pytest.fixture
def s1_model():
    return nonlocal_model()


@pytest.fixture
def s1_gamma():
    return chirped_gamma()


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
