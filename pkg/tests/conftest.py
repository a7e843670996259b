import numpy as np
import pytest

from skewstream.types import ComponentMatrices

# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, passed: bool, detail: str):
    line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def separated_matrices(seed=0, K=3, U=20, concentration=0.3,
                       rates=((0.2, 1.5, 8.0), (5.0, 0.3, 1.0))):
    """K components over one categorical and len(rates) continuous attributes.

    Shapes are drawn from [0.3, 2]; the rates are fixed so that components
    differ in scale as well as in their categorical profile.
    """
    g = np.random.default_rng(seed)
    cat = g.dirichlet(np.full(U, concentration), size=K)
    shapes = g.uniform(0.3, 2.0, size=(len(rates), K))
    gamma = [np.column_stack([shapes[j], np.asarray(rates[j], dtype=float)])
             for j in range(len(rates))]
    return ComponentMatrices([cat], gamma, np.full((1, K), 1.0 / K))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
