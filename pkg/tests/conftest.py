import numpy as np
import pytest

from robustacg import CouplingModel, GameInstance, StrategySpace, UtilityFamily


def build_game(x, y, family, spaces=None, total=1.0):
    """Game from raw coupling data; default spaces are [0, total] boxes with sum <= total."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, _, k = x.shape
    if spaces is None:
        spaces = [StrategySpace.budget(k, total) for _ in range(n)]
    return GameInstance(spaces, CouplingModel(x, y), family)


def rate_log_game(x, y, total=1.0):
    return build_game(x, y, UtilityFamily.rate_log(), total=total)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance report lines, which output capture would hide."""
    import sys
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
