"""Pure NumPy implementation of the optimistic-argmax kernel.

Evaluates, for every candidate feature column c, the relaxed optimistic
value min_e (center_e'c + radius_e * ||c||_{shape_e^{-1}}) and returns the
first argmax. The compiled lane in _kernels.pyx computes the same thing;
this lane is the fallback when the extension is unavailable.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular


def ucb_argmax(cols, centers, chols, radii, is_ball):
    """First argmax over columns of the min-over-ellipsoids optimistic value.

    cols    (d, G) candidate feature columns
    centers (E, d) ellipsoid centers
    chols   (E, d, d) lower Cholesky factors of the shape matrices
            (rows flagged as balls ignore their factor)
    radii   (E,)
    is_ball (E,) nonzero where the shape is the identity

    Returns (index, value).
    """
    best = None
    for e in range(centers.shape[0]):
        if is_ball[e]:
            slack = np.sqrt(np.einsum("ij,ij->j", cols, cols))
        else:
            z = solve_triangular(chols[e], cols, lower=True, check_finite=False)
            slack = np.sqrt(np.einsum("ij,ij->j", z, z))
        vals = centers[e] @ cols + radii[e] * slack
        best = vals if best is None else np.minimum(best, vals)
    idx = int(np.argmax(best))
    return idx, float(best[idx])
