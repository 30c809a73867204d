import numpy as np
import pytest

from aadnet.data import SynthSpec, synthesize
from aadnet.preprocess import Preprocessor


def finite_difference(f, x, h=1e-5):
    """Central differences of scalar ``f`` with respect to every entry of ``x`` (in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def rel_error(a, n, floor=1e-8):
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_windows():
    """Two subjects of separable synthetic data cut into 0.5 s windows."""
    spec = SynthSpec(n_subjects=2, trials_per_subject=4, trial_seconds=10.0, seed=3)
    return Preprocessor(window_s=0.5).run(synthesize(spec))


ACCEPTANCE_LINES = []


def record(number, title, ok, detail):
    """Log one acceptance verdict for the terminal summary, then assert it."""
    line = f"criterion {str(number):>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
