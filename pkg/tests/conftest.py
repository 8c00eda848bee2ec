import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vshell.core import ShellParams, make_log_grid  # noqa: E402
from vshell.steady_state import solve_shell  # noqa: E402

# reference shell used across the suite: k = l = 1, L0 = 0.1, Mc = 1,
# variational amplitude, E0 = -2 (see the README for why not -0.3)
REFERENCE = dict(k=1.0, l=1.0, L0=0.1, Mc=1.0, E0=-2.0)
REFERENCE_GRID = (0.02, 2.0, 2000)

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def reference_params():
    return ShellParams(**REFERENCE)


@pytest.fixture(scope="session")
def reference_grid():
    return make_log_grid(*REFERENCE_GRID)


@pytest.fixture(scope="session")
def reference_model(reference_params, reference_grid):
    return solve_shell(reference_params, reference_grid)


@pytest.fixture(scope="session")
def reference_ensemble_small(reference_model):
    from vshell.dynamics import sample_shell

    return sample_shell(reference_model, 10_000, 0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int(str(k).rstrip("abcdefgh")), str(k))):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
