import numpy as np
import pytest

from deeppromp.data import DatasetSpec, generate
from deeppromp.model import DeepProMP


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_sine():
    return generate(DatasetSpec(n_demos=12, n_points=21, seed=3))


@pytest.fixture
def tiny_model(small_sine):
    return DeepProMP(small_sine.dim, small_sine.channel_widths(), latent_dim=4, hidden=8,
                     rng=np.random.default_rng(1))


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    """Remember a one-line verdict for the terminal summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
