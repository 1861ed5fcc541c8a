import numpy as np
import pytest

from budgetwise.model import GroupDist, ProblemInstance, SourceSpec


def make_problem(dists, costs, target, budget):
    sources = [SourceSpec(GroupDist(q), c) for q, c in zip(dists, costs)]
    return ProblemInstance(sources, GroupDist(target), budget)


@pytest.fixture
def clinic():
    """Urban clinic (cost 1) and rural clinic (cost 2), statewide target."""
    return make_problem([(0.8, 0.2), (0.25, 0.75)], (1, 2), (0.25, 0.75), 1000)


@pytest.fixture
def symmetric():
    return make_problem([(1, 0), (0, 1)], (1, 1), (0.5, 0.5), 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
