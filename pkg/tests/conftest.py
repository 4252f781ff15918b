import numpy as np
import pytest

from rankreveal.linalg import RngStream, gaussian
from rankreveal.synthetic import random_orthonormal


def sparse_plus_low_rank(seed=7, m=200, n=150, scale=100.0, outlier=50.0):
    """Rank-5 ``L*`` plus about 5% outliers of magnitude ``outlier``."""
    rng = RngStream(seed)
    U = random_orthonormal(rng, m, 5)
    V = random_orthonormal(rng, n, 5)
    L = (U * (np.array([40.0, 30.0, 20.0, 15.0, 10.0]) * scale)) @ V.T
    # |z| > 1.96 for a standard normal z has probability 0.05
    mask = np.abs(gaussian(rng, m, n)) > 1.96
    S = np.where(mask, outlier * np.sign(gaussian(rng, m, n)), 0.0)
    return L, S


def matrix_with_spectrum(seed, m, n, sigma):
    rng = RngStream(seed)
    p = len(sigma)
    return (random_orthonormal(rng, m, p) * np.asarray(sigma)) @ random_orthonormal(rng, n, p).T


@pytest.fixture
def rng():
    return RngStream(12345)


# one status line per acceptance criterion, echoed in the terminal summary
CRITERIA_LINES = []


def report_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
