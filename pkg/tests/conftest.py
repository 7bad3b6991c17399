import numpy as np
import pytest

from fafdm.waveform import FrameConfig, PulseConfig


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    # N = 64 at one eighth of the reference bandwidth keeps T_f and the Doppler scale
    cfg = FrameConfig(N=64, bandwidth_hz=7.68e6 / 8, c1=1 / 64)
    return cfg, PulseConfig(symbol_period=cfg.T_s)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
