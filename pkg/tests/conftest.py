import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scsd.model import SfrParams, build_dictionary  # noqa: E402
from scsd.sphere import icosa_tessellate  # noqa: E402

SFR = SfrParams(1.7e-3, 3e-4, 3000.0)


@pytest.fixture(scope="session")
def acq():
    return icosa_tessellate(2, hemisphere=True, b_value=3000.0)[0]


@pytest.fixture(scope="session")
def recon3():
    return icosa_tessellate(3, hemisphere=True)


@pytest.fixture(scope="session")
def dict3(acq, recon3):
    return build_dictionary(acq, recon3[0], SFR)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Log one pass/fail line per acceptance criterion (printed again in the terminal summary)."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
