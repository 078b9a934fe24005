import numpy as np
import pytest

from mcbeam import (ChannelModelParams, PerAntenna, ProblemInstance, SumPower,
                    generate_instance, lift_to_real)


def random_instance(N, M, seed=0, power=None, normalize=True):
    power = SumPower(10.0) if power is None else power
    inst = generate_instance(ChannelModelParams(N, M, rng_seed=seed), power)
    return inst, lift_to_real(inst, normalize=normalize)


def single_user(N, seed=0, P=10.0, sigma2=1.0):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    inst = ProblemInstance(channels=h[None, :], noise_vars=np.array([sigma2]),
                           power=SumPower(P))
    return inst, h


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_lift():
    return random_instance(4, 6, seed=3)[1]


@pytest.fixture
def per_antenna_lift():
    return random_instance(5, 4, seed=1, power=PerAntenna.uniform(0.5, 5))[1]


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
