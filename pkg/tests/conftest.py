import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion outcome for the end-of-run table."""
    store = request.config.stash.setdefault(_CRITERIA, [])

    def report(number, name, passed, detail=""):
        store.append((number, name, passed, detail))
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_CRITERIA, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(rows, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {name}  {detail}".rstrip())
