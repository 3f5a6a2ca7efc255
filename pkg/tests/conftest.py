import numpy as np
import pytest

from decoscatter import ExplicitModel, Scenario

FLIP = np.array([[0, 1], [1, 0]], dtype=complex)


def two_level(k=0.0, nq=FLIP, rho0=None, **kwargs):
    """H = X = diag(0, 1), rho0 = I/2, n(q) = flip unless overridden."""
    rho0 = np.eye(2) / 2 if rho0 is None else rho0
    return Scenario(np.diag([0.0, 1.0]), np.diag([0.0, 1.0]), rho0,
                    ExplicitModel(matrix=np.asarray(nq, dtype=complex)),
                    k=k, **kwargs)


def random_matrix(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


@pytest.fixture
def rng():
    return np.random.default_rng(20061015)


SUITE_BUDGET_S = 60.0
_session = {}


def pytest_sessionstart(session):
    import time
    _session["start"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import time
    import test_acceptance

    elapsed = time.perf_counter() - _session["start"]
    lines = list(test_acceptance.RESULTS)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    status = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    terminalreporter.write_line(
        f"criterion 8 (suite runtime): {status} - {elapsed:.1f} s "
        f"(< {SUITE_BUDGET_S:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    import time
    elapsed = time.perf_counter() - _session["start"]
    if elapsed >= SUITE_BUDGET_S and session.exitstatus == 0:
        session.exitstatus = 1
