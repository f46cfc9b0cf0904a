import numpy as np
import pytest

from kalmanflow import _backend, kalman, numerics, simulate
from kalmanflow.model import ControlSet, LinearSystem

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    mod = _backend.load(request.param)
    monkeypatch.setattr(numerics, "kernels", mod)
    monkeypatch.setattr(simulate, "kernels", mod)
    return request.param


@pytest.fixture
def double_integrator():
    return LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]),
                        ControlSet.box(1.0, 1))


@pytest.fixture
def deficient_diag():
    return LinearSystem(np.diag([1.0, 2.0]), np.array([[1.0], [0.0]]), ControlSet.box(1.0, 1))


def random_system(rng, n_range=(2, 5), m_range=(1, 3), controllable=None, K=None):
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        sys = LinearSystem(rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, m)),
                           K or ControlSet.box(1.0, m))
        if controllable is None or kalman.analyze(sys).controllable == controllable:
            return sys


def block_deficient_system(rng, n, r, m):
    """Random orthogonal conjugate of a block-triangular pair with an r-dim reachable part."""
    A = rng.uniform(-1, 1, (n, n))
    A[r:, :r] = 0.0
    B = np.zeros((n, m))
    B[:r] = rng.uniform(-1, 1, (r, m))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return LinearSystem(Q @ A @ Q.T, Q @ B, ControlSet.box(1.0, m)), Q[:, :r]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
