"""The compiled kernels and the pure-Python fallback must agree."""

import numpy as np
import pytest

from pathrank import _fallback, kernels
from pathrank.embedding import WalkConfig, _walk_uniforms
from pathrank.network import generate_grid_network

compiled = pytest.mark.skipif(kernels.BACKEND != "compiled", reason="extension not built")


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


@compiled
def test_walks_identical():
    net = generate_grid_network(5, 5, seed=2)
    starts = np.tile(np.arange(25, dtype=np.int64), 3)
    uniforms = _walk_uniforms(0, starts, np.repeat(np.arange(3), 25), 29)
    weights = net.costs[:, 0].min() / net.costs[:, 0]
    for inv_p, inv_q in [(1.0, 1.0), (4.0, 0.5), (0.25, 2.0)]:
        a = kernels.node2vec_walks(net.indptr, net.indices, weights, starts, uniforms, inv_p, inv_q)
        b = _fallback.node2vec_walks(net.indptr, net.indices, weights, starts, uniforms, inv_p, inv_q)
        assert np.array_equal(a, b)


@compiled
def test_sgns_close():
    rng = np.random.default_rng(0)
    walks = rng.integers(0, 12, size=(20, 15)).astype(np.int64)
    walks[3, 9:] = -1
    n_pairs = kernels.count_pairs(walks, 3)
    negatives = rng.integers(0, 12, size=(n_pairs, 4)).astype(np.int64)
    syn0 = rng.uniform(-0.1, 0.1, size=(12, 6))
    syn1 = rng.uniform(-0.1, 0.1, size=(12, 6))
    a0, a1, b0, b1 = syn0.copy(), syn1.copy(), syn0.copy(), syn1.copy()
    na = kernels.sgns_epoch(a0, a1, walks, negatives, 3, 0.025, 2.5e-6, 0, n_pairs)
    nb = _fallback.sgns_epoch(b0, b1, walks, negatives, 3, 0.025, 2.5e-6, 0, n_pairs)
    assert na == nb == n_pairs
    np.testing.assert_allclose(a0, b0, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(a1, b1, rtol=1e-10, atol=1e-13)


@compiled
def test_spur_dijkstra_identical_on_ties():
    net = generate_grid_network(4, 4, seed=1)
    weights = np.ones(net.edge_count)
    free_v = np.zeros(16, dtype=np.uint8)
    free_e = np.zeros(net.edge_count, dtype=np.uint8)
    for target in range(1, 16):
        a = kernels.spur_dijkstra(net.indptr, net.indices, weights, 0, target, 0.0, free_v, free_e)
        b = _fallback.spur_dijkstra(net.indptr, net.indices, weights, 0, target, 0.0, free_v, free_e)
        assert a == b


def test_pair_count():
    walks = np.array([[0, 1, 2, -1], [3, 4, -1, -1]], dtype=np.int64)
    # window 1: 0-1, 1-0, 1-2, 2-1, 3-4, 4-3
    assert kernels.count_pairs(walks, 1) == 6
    assert kernels.count_pairs(walks, 5) == 8
