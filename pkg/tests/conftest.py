import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bifurcate.kernel import Drift, InitialLaw, NBARModel, Noise  # noqa: E402

ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def linear_bar():
    return NBARModel(Drift.linear(0.4, 1.0), Drift.linear(0.3, 0.5), Noise("gaussian", 1.0),
                     InitialLaw.dirac(0.0))


@pytest.fixture
def zero_noise_bar():
    return NBARModel(Drift.linear(0.4, 1.0), Drift.linear(0.3, 0.5), Noise("gaussian", 0.0),
                     InitialLaw.dirac(0.0))


@pytest.fixture
def iid_model():
    return NBARModel(Drift.linear(0.0, 0.0), Drift.linear(0.0, 0.0), Noise("gaussian", 1.0),
                     InitialLaw.dirac(0.0))
