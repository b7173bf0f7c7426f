import numpy as np
import pytest

from entropy_split.gas import GasModel, conservative


def random_states(rng, n, d, rho=(0.5, 2.0), speed=1.0, p=(0.5, 2.0), gas=None):
    """Admissible conservative states with uniform random primitives."""
    gas = gas or GasModel()
    r = rng.uniform(*rho, size=n)
    V = rng.uniform(-speed, speed, size=(n, d))
    pr = rng.uniform(*p, size=n)
    return conservative(r, V, pr, gas)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


def record_acceptance(name, ok, detail):
    """Store and print one acceptance result line."""
    line = f"criterion {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
