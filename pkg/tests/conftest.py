import itertools

import numpy as np
import pytest

from onehot_lns.potts import PottsInstance

ACCEPTANCE_LINES: list[str] = []


def random_instance(rng, n, q, edge_prob=0.5, couplings=(-1.0, 1.0), shifts=(0, 1, -1)):
    """Random graph instance with integer couplings and shifts."""
    edges = []
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < edge_prob:
            edges.append((i, j, float(rng.choice(couplings)), int(rng.choice(shifts))))
    return PottsInstance.from_edges(n, q, edges, {"model": "random"})


def brute_potts_minimum(instance):
    """Minimum over all q^N assignments, evaluated edge by edge."""
    best = np.inf
    for combo in itertools.product(range(1, instance.q + 1), repeat=instance.num_vars):
        e = 0.0
        for i, j, J, d in instance.edges():
            if (combo[i] - combo[j] - d) % instance.q == 0:
                e += J
        best = min(best, e)
    return best


def naive_energy(instance, a):
    return sum(J for i, j, J, d in instance.edges() if (a[i] - a[j] - d) % instance.q == 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
