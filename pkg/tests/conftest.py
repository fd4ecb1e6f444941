from __future__ import annotations

import pytest

from nlfkpp.grid import build_grid
from nlfkpp.initdata import SpikeProfile, build_u0
from nlfkpp.model import ModelParams
from nlfkpp.solver import StepControl, run

# weak non-local damping and a large amplitude: a configuration that blows up
BLOWUP = dict(N=5, p=3.0, beta=2.0, sigma=0.01, lam=2.0, delta=0.05)
REFERENCE = dict(N=4, p=3.0, beta=2.0, sigma=1.0, lam=0.05, delta=0.05)


def spike_run(params: ModelParams, M: int = 2048, gamma: float = 2.0, **control):
    grid = build_grid(M, gamma, params.N)
    u0 = build_u0(SpikeProfile.from_params(params), grid)
    return grid, u0, run(params, grid, u0, StepControl(**control))


@pytest.fixture(scope="session")
def blowup_params():
    return ModelParams(**BLOWUP)


@pytest.fixture(scope="session")
def blowup_run(blowup_params):
    grid, u0, out = spike_run(blowup_params, t_end=1.0, snapshot_times=(1e-4, 2e-4, 3e-4))
    return blowup_params, grid, u0, out


@pytest.fixture(scope="session")
def reference_params():
    return ModelParams(**REFERENCE)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
