"""Compare the compiled kernels with the pure-Python fallback.

Each workload runs through the public API with the kernel dispatch pointed at
one backend, then the other; results are checked for agreement.

    python3 benchmarks/bench_kernels.py [--rows 12] [--repeat 3]
"""

import argparse
import itertools
import time
from contextlib import contextmanager

import numpy as np

from pathrank import _fallback, kernels
from pathrank.embedding import SkipGramConfig, WalkConfig, generate_walks, train_skipgram
from pathrank.network import CostKind, generate_grid_network
from pathrank.routing import yen_next_shortest

try:
    from pathrank import _kernels
except ImportError:
    _kernels = None

KERNEL_NAMES = ("spur_dijkstra", "node2vec_walks", "sgns_epoch")


@contextmanager
def backend(module):
    saved = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        for name in KERNEL_NAMES:
            setattr(kernels, name, getattr(module, name))
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def workloads(rows):
    net = generate_grid_network(rows, rows, seed=0)
    dest = net.vertex_count - 1
    walk_cfg = WalkConfig(walks_per_vertex=4, walk_length=40, seed=0)
    walks = generate_walks(net, walk_cfg)
    sg_cfg = SkipGramConfig(epochs=1, seed=0)
    return {
        "yen k=50": lambda: list(itertools.islice(yen_next_shortest(net, 0, dest, CostKind.DISTANCE), 50)),
        "node2vec walks": lambda: generate_walks(net, walk_cfg),
        "skip-gram epoch (M=64)": lambda: train_skipgram(walks, net.vertex_count, 64, sg_cfg),
    }


def same(a, b):
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=1e-9, atol=1e-12)
    return a == b


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=12)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install --no-build-isolation -e .` first")
        return 1
    print(f"{'workload':<24}{'compiled s':>12}{'python s':>12}{'speedup':>10}  agree")
    for name, fn in workloads(args.rows).items():
        with backend(_kernels):
            t_c, r_c = best_of(fn, args.repeat)
        with backend(_fallback):
            t_p, r_p = best_of(fn, 1)
        print(f"{name:<24}{t_c:>12.4f}{t_p:>12.4f}{t_p / t_c:>9.1f}x  {same(r_c, r_p)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
