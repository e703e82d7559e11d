import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nodalshoot.scalar import find_amplitude  # noqa: E402

LAMBDAS = (1.0, 2.0, 5.0)
PS = (0, 1, 2, 3)


@pytest.fixture(scope="session")
def scalar_records():
    """The twelve scalar solutions (λ ∈ {1,2,5}, μ = 1, P ≤ 3)."""
    return {(lam, P): find_amplitude(lam, 1.0, P) for lam in LAMBDAS for P in PS}


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
