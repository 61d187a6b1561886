import time

import numpy as np
import pytest

from groupshap.experiments import ExperimentConfig, run_experiment

from groupshap.gaussian import GaussianModel
from groupshap.models import ModelSpec


def brute_force_shapley(value, players):
    """Average marginal contributions over every ordering (independent oracle)."""
    from itertools import permutations

    P = len(players)
    phi = np.zeros(P)
    count = 0
    for order in permutations(range(P)):
        mask = 0
        for p in order:
            before = value(mask)
            mask |= players[p]
            phi[p] += value(mask) - before
        count += 1
    return phi / count


@pytest.fixture
def small_gaussian():
    cov = np.array(
        [
            [1.0, 0.5, 0.2, 0.0],
            [0.5, 2.0, 0.3, 0.1],
            [0.2, 0.3, 1.5, -0.4],
            [0.0, 0.1, -0.4, 1.0],
        ]
    )
    return GaussianModel(np.array([0.3, -0.2, 0.0, 1.0]), cov)


@pytest.fixture
def small_model():
    return ModelSpec(
        4,
        intercept=0.7,
        linear_terms=((0, 1.2), (2, -0.5)),
        cosine_terms=((1, 0.8), (3, -1.1)),
        product_terms=((0, 3, 0.6),),
        hfun_terms=((1, 2),),
    )


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


# default-configuration experiment runs shared across test modules
@pytest.fixture(scope="session")
def experiment1():
    t = time.perf_counter()
    res = run_experiment(ExperimentConfig(1))
    return res, time.perf_counter() - t


@pytest.fixture(scope="session")
def experiment2():
    return run_experiment(ExperimentConfig(2, rho_grid=(0.0, 0.9)))


@pytest.fixture(scope="session")
def experiment3():
    return run_experiment(ExperimentConfig(3, groupings=("A",), rho_grid=(0.0, 0.7)))
