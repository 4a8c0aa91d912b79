import numpy as np
import pytest

from algcurv.tensor_core import Space


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def signatures(m):
    return [Space(0, m), Space(1, m - 1)]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and getattr(mod, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
