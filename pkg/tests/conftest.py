import random

import numpy as np

import pytest

from pathrank.network import COST_KINDS, Edge, RoadNetwork, generate_grid_network, path_cost


def random_network(seed, max_vertices=8, density=0.4, integer_costs=False):
    """Small random digraph; integer costs make equal-cost ties common."""
    rng = random.Random(seed)
    n = rng.randint(3, max_vertices)
    edges = []
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < density:
                if integer_costs:
                    costs = [rng.randint(1, 4) for _ in range(3)]
                else:
                    costs = [round(rng.uniform(1.0, 10.0), 3) for _ in range(3)]
                edges.append(Edge(u, v, *costs))
    return RoadNetwork.from_edges(n, edges)


def enumerate_simple_paths(network, source, dest):
    """Every loopless source-dest path by depth-first search."""
    out = []
    stack = [(source,)]
    while stack:
        path = stack.pop()
        u = path[-1]
        if u == dest:
            out.append(path)
            continue
        for v in network.neighbors(u):
            v = int(v)
            if v not in path:
                stack.append(path + (v,))
    return out


def sorted_by_cost(network, paths, kind):
    return sorted(paths, key=lambda p: (sum(network.cost(u, v, kind)
                                            for u, v in zip(p[:-1], p[1:])), p))


def relative_error(a, b):
    """Norm-based relative difference, robust to tiny gradients."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def numeric_gradient(loss_fn, arr, eps=1e-5):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    grad = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = loss_fn()
        flat[i] = old - eps
        down = loss_fn()
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return grad


def barbell_network(clique=6):
    """Two directed cliques joined by one bridge in both directions."""
    edges = []
    for base in (0, clique):
        for u in range(base, base + clique):
            for v in range(base, base + clique):
                if u != v:
                    edges.append(Edge(u, v, 100.0, 10.0, 8.0))
    edges += [Edge(clique - 1, clique, 100.0, 10.0, 8.0), Edge(clique, clique - 1, 100.0, 10.0, 8.0)]
    return RoadNetwork.from_edges(2 * clique, edges)


@pytest.fixture
def grid3():
    return generate_grid_network(3, 3, seed=7)


@pytest.fixture
def line_network():
    # 0 -> 1 -> 2 and a direct 0 -> 2
    return RoadNetwork.from_edges(4, [Edge(0, 1, 100, 10, 8), Edge(1, 2, 50, 5, 4),
                                      Edge(0, 2, 200, 12, 15)])


__all__ = ["random_network", "relative_error", "numeric_gradient", "barbell_network", "enumerate_simple_paths", "sorted_by_cost", "COST_KINDS",
           "path_cost"]


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line per acceptance criterion, then assert it."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
