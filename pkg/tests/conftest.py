import numpy as np
import pytest

from hamspec import SystemCoefficients
from oracles import random_blocks


def random_system(seed, n, length=256, decay=1.5, scale=0.8):
    """Random admissible system whose coefficients decay like ``(1+t)^-decay``.

    Summable perturbations of the identity keep ``Φ`` bounded, so roundoff in
    long products stays at the unit-roundoff level.
    """
    rng = np.random.default_rng(seed)
    table = [random_blocks(rng, n, scale / (1 + t) ** decay) for t in range(length)]

    def provider(t):
        return table[t]

    return SystemCoefficients(n, 0, provider, {}, f"random-{seed}"), table


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
