"""Kernel dispatch: compiled extension when built, pure Python otherwise.

Set ``PATHRANK_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

try:
    if os.environ.get("PATHRANK_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python kernels requested")
    from . import _kernels as _impl
    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

spur_dijkstra = _impl.spur_dijkstra
node2vec_walks = _impl.node2vec_walks
sgns_epoch = _impl.sgns_epoch
count_pairs = _fallback.count_pairs

__all__ = ["BACKEND", "spur_dijkstra", "node2vec_walks", "sgns_epoch", "count_pairs"]
