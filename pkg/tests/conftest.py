import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bipartite(rng, env_dim):
    from pointerlab.hilbert import BipartiteState

    v = rng.normal(size=2 * env_dim) + 1j * rng.normal(size=2 * env_dim)
    v /= np.linalg.norm(v)
    return BipartiteState.from_vector(v, env_dim)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    """Log one acceptance verdict; the summary prints them in order."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
