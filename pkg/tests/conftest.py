import numpy as np
import pytest

from cotunnel.cli import random_configs
from cotunnel.model import EnergyConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def example():
    """Reference point (E_L, Delta_L, Delta_R, U) = (-3, 0.5, 1, 2), unit couplings."""
    return EnergyConfig(E_L=-3.0, Delta_L=0.5, Delta_R=1.0, U=2.0)


@pytest.fixture
def weak(example):
    return example.with_(V_L=1e-2, V_R1=1e-2, V_R2=1e-2)


def sample(n, seed=0, **overrides):
    return random_configs(np.random.default_rng(seed), n, **overrides)


@pytest.fixture
def report():
    """Record one PASS/FAIL line, echoed in the terminal summary."""

    def _report(number, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
