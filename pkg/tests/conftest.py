import numpy as np
import pytest

from wavedbn.synthetic import write_coil_like

# Filled by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_coil_dir(tmp_path_factory):
    """A full 20 x 72 COIL-20-named directory of synthetic 128x128 PGMs."""
    return write_coil_like(tmp_path_factory.mktemp("coil_synthetic"), seed=7)
