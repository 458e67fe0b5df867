import numpy as np
import pytest

from hypuml import ball
from hypuml._kernels import _pairwise_py

try:
    from hypuml._kernels import _pairwise as _pairwise_cy
except ImportError:  # extension not built; fallback-only run
    _pairwise_cy = None

KERNEL_BACKENDS = [pytest.param(_pairwise_py, id="python")]
if _pairwise_cy is not None:
    KERNEL_BACKENDS.append(pytest.param(_pairwise_cy, id="cython"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ball_points(rng, n, dim, c, lo=0.0, hi=0.95):
    """Random points with sqrt(c)*||x|| uniform in [lo, hi]."""
    d = rng.standard_normal((n, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(lo, hi, (n, 1)) / np.sqrt(c)


def tiny_batch(P=3, K=2, dim=4, c=0.1, seed=0, lo=0.1, hi=0.6):
    r = np.random.default_rng(seed)
    return ball_points(r, P * K, dim, c, lo, hi), np.repeat(np.arange(P), K)


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion(capsys):
    """Print and remember one PASS/FAIL line; returns ``ok`` so tests can assert on it."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} :: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
