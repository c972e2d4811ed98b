# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``pathrank._fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef cnp.int64_t i64

cdef double SIGMOID_CLIP = 30.0


cdef inline bint _heap_less(double da, i64 va, double db, i64 vb) nogil:
    return da < db or (da == db and va < vb)


cdef void _heap_push(double* hd, i64* hv, i64* size, double d, i64 v) nogil:
    cdef i64 i = size[0]
    cdef i64 parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _heap_less(d, v, hd[parent], hv[parent]):
            hd[i] = hd[parent]
            hv[i] = hv[parent]
            i = parent
        else:
            break
    hd[i] = d
    hv[i] = v


cdef void _heap_pop(double* hd, i64* hv, i64* size, double* d, i64* v) nogil:
    cdef i64 n, i, child
    cdef double ld
    cdef i64 lv
    d[0] = hd[0]
    v[0] = hv[0]
    size[0] -= 1
    n = size[0]
    if n == 0:
        return
    ld = hd[n]
    lv = hv[n]
    i = 0
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and _heap_less(hd[child + 1], hv[child + 1], hd[child], hv[child]):
            child += 1
        if _heap_less(hd[child], hv[child], ld, lv):
            hd[i] = hd[child]
            hv[i] = hv[child]
            i = child
        else:
            break
    hd[i] = ld
    hv[i] = lv


cdef i64 _fill_chain(i64* pred, i64 v, i64* buf) nogil:
    cdef i64 n = 0, i, tmp
    while v >= 0:
        buf[n] = v
        n += 1
        v = pred[v]
    for i in range(n // 2):
        tmp = buf[i]
        buf[i] = buf[n - 1 - i]
        buf[n - 1 - i] = tmp
    return n


cdef bint _chain_extension_smaller(i64* pred, i64 u, i64 v, i64* a, i64* b) nogil:
    # is chain(u) + [v] lexicographically smaller than chain(v)?
    cdef i64 na = _fill_chain(pred, u, a)
    cdef i64 nb = _fill_chain(pred, v, b)
    cdef i64 i
    a[na] = v
    na += 1
    for i in range(na if na < nb else nb):
        if a[i] != b[i]:
            return a[i] < b[i]
    return na < nb


def spur_dijkstra(const i64[::1] indptr, const i64[::1] indices,
                  const double[::1] weights, i64 source, i64 target,
                  double init_dist, const unsigned char[::1] blocked_vertex,
                  const unsigned char[::1] blocked_edge):
    cdef i64 n = indptr.shape[0] - 1
    cdef i64 m = indices.shape[0]
    cdef double* dist = <double*> malloc(n * sizeof(double))
    cdef i64* pred = <i64*> malloc(n * sizeof(i64))
    cdef unsigned char* settled = <unsigned char*> malloc(n)
    cdef double* hd = <double*> malloc((m + 1) * sizeof(double))
    cdef i64* hv = <i64*> malloc((m + 1) * sizeof(i64))
    cdef i64* bufa = <i64*> malloc((n + 1) * sizeof(i64))
    cdef i64* bufb = <i64*> malloc((n + 1) * sizeof(i64))
    cdef i64 size = 0, u, v, e, i, length = -1
    cdef double d, nd
    try:
        for i in range(n):
            dist[i] = INFINITY
            pred[i] = -1
            settled[i] = 0
        dist[source] = init_dist
        _heap_push(hd, hv, &size, init_dist, source)
        with nogil:
            while size > 0:
                _heap_pop(hd, hv, &size, &d, &u)
                if settled[u] or d > dist[u]:
                    continue
                settled[u] = 1
                if u == target:
                    length = _fill_chain(pred, target, bufa)
                    break
                for e in range(indptr[u], indptr[u + 1]):
                    v = indices[e]
                    if settled[v] or blocked_vertex[v] or blocked_edge[e]:
                        continue
                    nd = d + weights[e]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = u
                        _heap_push(hd, hv, &size, nd, v)
                    elif nd == dist[v] and _chain_extension_smaller(pred, u, v, bufa, bufb):
                        pred[v] = u
        if length < 0:
            return None
        return [bufa[i] for i in range(length)]
    finally:
        free(dist)
        free(pred)
        free(settled)
        free(hd)
        free(hv)
        free(bufa)
        free(bufb)


def node2vec_walks(const i64[::1] indptr, const i64[::1] indices,
                   const double[::1] weights, const i64[::1] starts,
                   const double[:, ::1] uniforms, double inv_p, double inv_q):
    cdef i64 n_walks = starts.shape[0]
    cdef i64 length = uniforms.shape[1] + 1
    cdef i64 max_deg = 0, u
    for u in range(indptr.shape[0] - 1):
        if indptr[u + 1] - indptr[u] > max_deg:
            max_deg = indptr[u + 1] - indptr[u]
    out_arr = np.full((n_walks, length), -1, dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef double* scaled = <double*> malloc((max_deg + 1) * sizeof(double))
    cdef i64 w, step, cur, prev, lo, hi, e, x, plo, phi, mid, chosen, i
    cdef double total, bias, s, threshold, acc
    try:
        with nogil:
            for w in range(n_walks):
                cur = starts[w]
                prev = -1
                out[w, 0] = cur
                for step in range(length - 1):
                    lo = indptr[cur]
                    hi = indptr[cur + 1]
                    if lo == hi:
                        break
                    total = 0.0
                    for e in range(lo, hi):
                        x = indices[e]
                        if prev < 0:
                            bias = 1.0
                        elif x == prev:
                            bias = inv_p
                        else:
                            plo = indptr[prev]
                            phi = indptr[prev + 1]
                            while plo < phi:
                                mid = (plo + phi) >> 1
                                if indices[mid] < x:
                                    plo = mid + 1
                                else:
                                    phi = mid
                            if plo < indptr[prev + 1] and indices[plo] == x:
                                bias = 1.0
                            else:
                                bias = inv_q
                        s = weights[e] * bias
                        scaled[e - lo] = s
                        total += s
                    threshold = uniforms[w, step] * total
                    chosen = hi - 1
                    acc = 0.0
                    for i in range(hi - lo):
                        acc += scaled[i]
                        if threshold < acc:
                            chosen = lo + i
                            break
                    prev = cur
                    cur = indices[chosen]
                    out[w, step + 1] = cur
    finally:
        free(scaled)
    return out_arr


cdef inline double _sigmoid(double x) nogil:
    if x > SIGMOID_CLIP:
        x = SIGMOID_CLIP
    elif x < -SIGMOID_CLIP:
        x = -SIGMOID_CLIP
    return 1.0 / (1.0 + exp(-x))


def sgns_epoch(double[:, ::1] syn0, double[:, ::1] syn1, const i64[:, ::1] walks,
               const i64[:, ::1] negatives, i64 window, double lr0, double min_lr,
               i64 pair_offset, i64 total_pairs):
    cdef i64 dim = syn0.shape[1]
    cdef i64 n_neg = negatives.shape[1]
    cdef i64 n_walks = walks.shape[0]
    cdef i64 width = walks.shape[1]
    cdef double* neu1e = <double*> malloc(dim * sizeof(double))
    cdef i64 k = 0, w, length, i, j, jlo, jhi, c, o, t, target, a
    cdef double lr, label, f, g
    try:
        with nogil:
            for w in range(n_walks):
                length = 0
                for i in range(width):
                    if walks[w, i] >= 0:
                        length += 1
                for i in range(length):
                    c = walks[w, i]
                    jlo = i - window if i - window > 0 else 0
                    jhi = i + window + 1 if i + window + 1 < length else length
                    for j in range(jlo, jhi):
                        if j == i:
                            continue
                        o = walks[w, j]
                        lr = lr0 * (1.0 - (<double> (pair_offset + k)) / total_pairs)
                        if lr < min_lr:
                            lr = min_lr
                        for a in range(dim):
                            neu1e[a] = 0.0
                        for t in range(n_neg + 1):
                            if t == 0:
                                target = o
                                label = 1.0
                            else:
                                target = negatives[k, t - 1]
                                if target == o:
                                    continue
                                label = 0.0
                            f = 0.0
                            for a in range(dim):
                                f = f + syn0[c, a] * syn1[target, a]
                            g = (label - _sigmoid(f)) * lr
                            for a in range(dim):
                                neu1e[a] = neu1e[a] + g * syn1[target, a]
                                syn1[target, a] = syn1[target, a] + g * syn0[c, a]
                        for a in range(dim):
                            syn0[c, a] = syn0[c, a] + neu1e[a]
                        k += 1
    finally:
        free(neu1e)
    return k
