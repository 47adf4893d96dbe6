"""Independent brute-force references used by the test suite.

Everything here recomputes quantities from first principles (dense grids,
rejection sampling, direct least squares) without calling the production
code paths, so tests can compare two genuinely different routes to the
same number. Single-threaded, never used in hot loops.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


def grid_revenue_argmax(theta, ctx, spec, resolution: int = 100_000) -> float:
    """Exhaustive revenue argmax over a uniform price grid on [l, u]."""
    ps = np.linspace(spec.l, spec.u, int(resolution))
    vals = ps * (float(theta.alpha @ ctx.x) + float(theta.beta @ ctx.y) * ps)
    return float(ps[int(np.argmax(vals))])


def _inside(e, pts: np.ndarray) -> np.ndarray:
    """Membership mask of points (n, d) in one ellipsoid, recomputed directly."""
    diff = pts - np.asarray(e.center, dtype=float)
    if e.shape is None:
        sq = np.sum(diff * diff, axis=1)
    else:
        m = np.asarray(e.shape, dtype=float)
        sq = np.einsum("ni,ij,nj->n", diff, m, diff)
    return sq <= e.radius ** 2 + 1e-12


def rejection_max_linear(ellipsoids: Sequence, c: np.ndarray,
                         samples: int = 100_000, seed: int = 0) -> Optional[float]:
    """Max of c'theta over uniform proposals accepted by every ellipsoid.

    Proposals are drawn from the axis-aligned bounding box of the first
    ellipsoid. Returns None when nothing is accepted (e.g. a genuinely
    empty intersection).
    """
    if len(ellipsoids) == 0:
        raise ValueError("need at least one ellipsoid")
    first = ellipsoids[0]
    center = np.asarray(first.center, dtype=float)
    d = center.shape[0]
    if first.shape is None:
        half = np.full(d, float(first.radius))
    else:
        m_inv = np.linalg.inv(np.asarray(first.shape, dtype=float))
        half = float(first.radius) * np.sqrt(np.maximum(np.diag(m_inv), 0.0))
    rng = np.random.Generator(np.random.Philox(seed))
    pts = center + rng.uniform(-1.0, 1.0, size=(int(samples), d)) * half
    mask = np.ones(pts.shape[0], dtype=bool)
    for e in ellipsoids:
        mask &= _inside(e, pts)
    if not mask.any():
        return None
    return float(np.max(pts[mask] @ np.asarray(c, dtype=float)))


def normal_eq_ridge(features: np.ndarray, responses: np.ndarray, lam: float) -> np.ndarray:
    """Ridge estimate via the dense normal equations (lam I + F'F) theta = F'D."""
    f = np.asarray(features, dtype=float)
    d = f.shape[1]
    lhs = lam * np.eye(d) + f.T @ f
    rhs = f.T @ np.asarray(responses, dtype=float)
    return np.linalg.solve(lhs, rhs)


def schur_min(data) -> float:
    """min over v of sum_n (v'x_n + y_n p_n)^2, by direct least squares.

    This is the residual sum of squares from regressing -(y p) on x, which
    the Schur complement of the offline Gram's x-block must reproduce.
    """
    x = np.asarray(data.xs, dtype=float)
    t = np.asarray(data.ys, dtype=float)[:, 0] * np.asarray(data.prices, dtype=float)
    v, *_ = np.linalg.lstsq(x, -t, rcond=None)
    resid = x @ v + t
    return float(resid @ resid)


def closed_form_regret(theta, p: float, ctx) -> float:
    """-(beta'y) (p - p*)^2 with the unprojected vertex p* = -alpha'x/(2 beta'y)."""
    by = float(theta.beta @ ctx.y)
    p_star = -float(theta.alpha @ ctx.x) / (2.0 * by)
    return -by * (p - p_star) ** 2
