import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from lambda_shelve import SystemParams

# fixed example generation keeps the suite reproducible run to run
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

REFERENCE = dict(omega1=0.5, omega2=5e-3, delta1=0.0, delta2=0.05, gamma1=1.0, gamma2=1e-4)
DEEP = dict(omega1=1.0, omega2=1e-3, delta1=0.0, delta2=0.05, gamma1=1.0, gamma2=0.0)


@pytest.fixture
def reference():
    return SystemParams(**REFERENCE)


def random_params(rng, equal=False, min_split=0.0):
    omega1, omega2 = rng.uniform(0.05, 3.0, 2)
    gamma1 = rng.uniform(0.1, 2.0)
    gamma2 = rng.uniform(0.0, 1.0)
    delta1 = rng.uniform(-2.0, 2.0)
    if equal:
        delta2 = delta1
    else:
        delta2 = delta1
        while abs(delta2 - delta1) < max(min_split, 1e-6):
            delta2 = rng.uniform(-2.0, 2.0)
    return SystemParams(omega1, omega2, delta1, delta2, gamma1, gamma2)


finite = dict(allow_nan=False, allow_infinity=False)
params_strategy = st.builds(
    SystemParams,
    omega1=st.floats(0.0, 3.0, **finite),
    omega2=st.floats(0.0, 3.0, **finite),
    delta1=st.floats(-2.0, 2.0, **finite),
    delta2=st.floats(-2.0, 2.0, **finite),
    gamma1=st.floats(0.05, 2.0, **finite),
    gamma2=st.floats(0.0, 1.0, **finite),
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
