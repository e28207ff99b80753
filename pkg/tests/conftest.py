import math

import numpy as np
import pytest

from geogates.invariant import SingleQubitDrive, TwoQubitDrive

_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ident, name, passed, detail in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"AC{ident} {status}  {name}: {detail}")


@pytest.fixture
def record_criterion():
    def record(ident, name, passed, detail=""):
        _ACCEPTANCE.append((ident, name, bool(passed), detail))
        return passed

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_single_drives(rng, n, omega=None):
    drives = []
    while len(drives) < n:
        w = omega if omega is not None else rng.uniform(0.5, 2.0)
        d = SingleQubitDrive(w, rng.uniform(0.0, 2.0) * w, rng.uniform(0.05, 2.0) * w)
        if d.lam > 0.05 * w:
            drives.append(d)
    return drives


def random_two_drives(rng, n):
    drives = []
    while len(drives) < n:
        w = rng.uniform(0.5, 2.0)
        J = rng.uniform(-1.5, 1.5) * w
        if abs(J) < 0.05 * w:
            continue
        drives.append(TwoQubitDrive(w, J, rng.uniform(0.05, 2.0) * w))
    return drives


def random_hermitian(rng, n, dim):
    X = rng.normal(size=(n, dim, dim)) + 1j * rng.normal(size=(n, dim, dim))
    return 0.5 * (X + np.conj(np.swapaxes(X, -1, -2)))


EXAMPLE_J = 16 / 27
EXAMPLE_OMEGA0 = 4 * math.sqrt(11) / 27
