import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

from hlip import HlipParams


@pytest.fixture
def params():
    return HlipParams(g=9.81, z0=1.0, t_ssp=0.4, t_dsp=0.1)


@pytest.fixture(scope="session")
def default_gait():
    """The stepping-in-place gait for default model parameters and options."""
    from hlip.gaitopt import optimize_stepping_in_place

    return optimize_stepping_in_place()


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
