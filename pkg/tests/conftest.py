import numpy as np
import pytest

from stochdiss import DelayDistribution, PlantModel

# Two-state benchmark plant used throughout: peak gain ~2, slow pole 0.9451.
BENCH_A = [[0.6024, -0.0038], [0.0381, 0.9451]]
BENCH_B = [[0.1647], [0.0960]]
BENCH_C = [[0.0, 1.0]]
BENCH_D = [[0.0]]

PMFS = {
    "p1": {1: 0.01, 2: 0.01, 3: 0.01, 4: 0.01, 5: 0.96},
    "p2": {1: 0.05, 2: 0.05, 3: 0.05, 4: 0.1, 5: 0.75},
    "p3": {1: 0.2, 2: 0.2, 3: 0.2, 4: 0.2, 5: 0.2},
    "p4": {1: 0.75, 2: 0.1, 3: 0.05, 4: 0.05, 5: 0.05},
    "p5": {1: 0.96, 2: 0.01, 3: 0.01, 4: 0.01, 5: 0.01},
}


@pytest.fixture(scope="session")
def plant():
    return PlantModel(A=BENCH_A, B=BENCH_B, C=BENCH_C, D=BENCH_D)


@pytest.fixture(scope="session")
def dists():
    return {name: DelayDistribution.from_mapping(pmf)
            for name, pmf in PMFS.items()}


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
