"""Kernel selection: compiled extension when available, NumPy otherwise.

Both lanes implement the same optimistic-argmax contract and agree to
floating-point reassociation tolerance (~1e-12 relative); within one lane
results are bitwise deterministic. kernels.BACKEND says which lane loaded.
"""
from __future__ import annotations

import numpy as np

try:
    from . import _kernels as _impl
    BACKEND = "compiled"
except ImportError:
    from . import _kernels_py as _impl
    BACKEND = "numpy"


def ucb_argmax(cols, centers, chols, radii, is_ball):
    """(index, value) of the first argmax over columns of the optimistic value."""
    cols = np.ascontiguousarray(cols, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    chols = np.ascontiguousarray(chols, dtype=np.float64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    is_ball = np.ascontiguousarray(is_ball, dtype=np.uint8)
    return _impl.ucb_argmax(cols, centers, chols, radii, is_ball)


def price_columns(prices, x, y):
    """Revenue feature columns c(p) = [p x; p^2 y] for a whole price grid."""
    prices = np.asarray(prices, dtype=np.float64)
    d1 = x.shape[0]
    cols = np.empty((d1 + y.shape[0], prices.shape[0]))
    cols[:d1] = x[:, None] * prices[None, :]
    cols[d1:] = y[:, None] * (prices * prices)[None, :]
    return cols


def ucb_price_argmax(prices, x, y, centers, chols, radii, is_ball):
    """Grid UCB maximization for pricing; ties resolve to the smallest price."""
    idx, val = ucb_argmax(price_columns(prices, x, y), centers, chols, radii, is_ball)
    return idx, val
