import numpy as np
import pytest

from wpduality.experiments import preset_state
from wpduality.qstate import StokesVector, from_stokes, random_stokes


@pytest.fixture
def phi1():
    return preset_state("phi1")


@pytest.fixture(params=["phi1", "phi2", "phi3", "phi4"])
def preset(request):
    return request.param, preset_state(request.param)


@pytest.fixture
def random_states():
    rng = np.random.default_rng(1234)
    return [from_stokes(StokesVector(*s)) for s in random_stokes(rng, 200, "bloch_ball")]


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def record_criterion(request):
    """Store one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
