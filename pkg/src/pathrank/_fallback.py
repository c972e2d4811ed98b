"""Pure-Python kernels.

Reference implementations of the three hot loops: spur Dijkstra, biased
random walks and skip-gram negative-sampling SGD.  ``_kernels.pyx`` mirrors
these operation for operation; the kernels module picks whichever imports.
"""

import heapq
import math
from bisect import bisect_left

import numpy as np

SIGMOID_CLIP = 30.0


def _chain(pred, v):
    out = []
    while v >= 0:
        out.append(v)
        v = pred[v]
    out.reverse()
    return out


def spur_dijkstra(indptr, indices, weights, source, target, init_dist,
                  blocked_vertex, blocked_edge):
    """Least-cost path from ``source`` to ``target`` avoiding blocked items.

    Distances start at ``init_dist`` so accumulated sums match a left-to-right
    summation of the full path.  Equal-cost labels are resolved towards the
    lexicographically smaller vertex sequence.  Returns a list or None.
    """
    n = len(indptr) - 1
    indptr = indptr.tolist() if hasattr(indptr, "tolist") else indptr
    indices = indices.tolist() if hasattr(indices, "tolist") else indices
    weights = weights.tolist() if hasattr(weights, "tolist") else weights
    dist = [math.inf] * n
    pred = [-1] * n
    settled = [False] * n
    dist[source] = init_dist
    heap = [(init_dist, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if settled[u] or d > dist[u]:
            continue
        settled[u] = True
        if u == target:
            return _chain(pred, target)
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if settled[v] or blocked_vertex[v] or blocked_edge[e]:
                continue
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and _chain(pred, u) + [v] < _chain(pred, v):
                pred[v] = u
    return None


def node2vec_walks(indptr, indices, weights, starts, uniforms, inv_p, inv_q):
    """Second-order biased walks, one per entry of ``starts``.

    ``uniforms[w, s]`` drives step ``s`` of walk ``w`` by inverse-CDF selection
    over the current vertex's out-edges.  Dead ends truncate the walk; unused
    slots hold -1.
    """
    indptr = indptr.tolist()
    indices = indices.tolist()
    weights = weights.tolist()
    n_walks, length = len(starts), uniforms.shape[1] + 1
    out = np.full((n_walks, length), -1, dtype=np.int64)
    for w in range(n_walks):
        row = uniforms[w].tolist()
        cur = int(starts[w])
        prev = -1
        out[w, 0] = cur
        for step in range(length - 1):
            lo, hi = indptr[cur], indptr[cur + 1]
            if lo == hi:
                break
            total = 0.0
            scaled = []
            for e in range(lo, hi):
                x = indices[e]
                if prev < 0:
                    bias = 1.0
                elif x == prev:
                    bias = inv_p
                else:
                    plo, phi = indptr[prev], indptr[prev + 1]
                    k = bisect_left(indices, x, plo, phi)
                    bias = 1.0 if k < phi and indices[k] == x else inv_q
                s = weights[e] * bias
                scaled.append(s)
                total += s
            threshold = row[step] * total
            chosen = hi - 1
            acc = 0.0
            for i, s in enumerate(scaled):
                acc += s
                if threshold < acc:
                    chosen = lo + i
                    break
            prev, cur = cur, indices[chosen]
            out[w, step + 1] = cur
    return out


def _sigmoid(x):
    if x > SIGMOID_CLIP:
        x = SIGMOID_CLIP
    elif x < -SIGMOID_CLIP:
        x = -SIGMOID_CLIP
    return 1.0 / (1.0 + math.exp(-x))


def sgns_epoch(syn0, syn1, walks, negatives, window, lr0, min_lr,
               pair_offset, total_pairs):
    """One SGD pass of skip-gram with negative sampling, updating in place.

    Pairs are visited walk by walk, centre by centre, context left to right;
    ``negatives[i]`` are the noise vertices of the i-th visited pair.  The
    learning rate decays linearly with global progress.  Returns the number
    of pairs processed.
    """
    dim = syn0.shape[1]
    n_neg = negatives.shape[1]
    k = 0
    neu1e = np.empty(dim)
    for walk in walks:
        length = int(np.count_nonzero(walk >= 0))
        for i in range(length):
            c = int(walk[i])
            for j in range(max(0, i - window), min(length, i + window + 1)):
                if j == i:
                    continue
                o = int(walk[j])
                lr = lr0 * (1.0 - (pair_offset + k) / total_pairs)
                if lr < min_lr:
                    lr = min_lr
                h = syn0[c]
                neu1e[:] = 0.0
                for t in range(n_neg + 1):
                    if t == 0:
                        target, label = o, 1.0
                    else:
                        target = int(negatives[k, t - 1])
                        if target == o:
                            continue
                        label = 0.0
                    f = float(np.dot(h, syn1[target]))
                    g = (label - _sigmoid(f)) * lr
                    neu1e += g * syn1[target]
                    syn1[target] += g * h
                syn0[c] += neu1e
                k += 1
    return k


def count_pairs(walks, window):
    total = 0
    for walk in walks:
        length = int(np.count_nonzero(walk >= 0))
        for i in range(length):
            total += min(length, i + window + 1) - max(0, i - window) - 1
    return total
