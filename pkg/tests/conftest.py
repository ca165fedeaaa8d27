import numpy as np
import pytest

from elastoscatter.geometry import ClusterConfig
from elastoscatter.kernels import IncidentPlaneWave, Material
from elastoscatter.spectra import ball_shape, shape_spectrum

_ACCEPTANCE = pytest.StashKey[dict]()
N_CRITERIA = 11


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(n, name, passed, detail)."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(n, name, passed, detail=""):
        store[n] = (name, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in store:
            name, ok, detail = store[n]
            terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d} NOT RUN")


@pytest.fixture(scope="session")
def mat():
    return Material(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def mat2():
    return Material(2.0, 1.5, 1.3)


@pytest.fixture(scope="session")
def wave():
    return IncidentPlaneWave(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), 1.0, 0.5)


@pytest.fixture(scope="session")
def ball8():
    return ball_shape(8)


@pytest.fixture(scope="session")
def ball8_spectrum(ball8, mat):
    return shape_spectrum(ball8, mat, top=12)


@pytest.fixture
def small_config():
    # 2x2x2 lattice, boundary cells kept
    return ClusterConfig(a=0.01, s=0.3, h=0.6, c=4e5, b=0.05, count_prefactor=2.02,
                         skip_boundary=False)

