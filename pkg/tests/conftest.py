import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

from fairdyn import config
from fairdyn.dist import Gaussian
from fairdyn.model import GroupModel, Scenario, TransitionMatrix


@pytest.fixture(scope="session")
def fig2():
    return config.load("fig2").scenario


def make_scenario(ta, tb, ga=(-5, 5, 5), gb=(-5, 5, 5), share=0.5, up=1.0, um=1.0):
    """Two Gaussian groups; ga/gb are (mean0, mean1, stddev)."""
    def grp(p, t, s):
        return GroupModel(Gaussian(p[0], p[2]), Gaussian(p[1], p[2]),
                          TransitionMatrix.from_sequence(t), s)
    return Scenario(grp(ga, ta, share), grp(gb, tb, 1 - share), up, um)


# One line per acceptance criterion, printed after the run regardless of capture.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
