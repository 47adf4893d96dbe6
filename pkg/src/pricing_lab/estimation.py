"""Gram-matrix state and regularized least-squares estimators.

One GramState accumulates lam*I + sum_s A_s A_s' (plus the offline Gram
when seeded with one) together with the moment vector sum_s A_s D_s, where
A_s = [x_s; y_s p_s]. Solves go through a Cholesky factorization refreshed
from the stored matrix each time; at these sizes (d <= 16) that is cheap
and avoids the drift of incremental inverse updates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import Context, DemandParams, demand_features

__all__ = ["GramState", "gram_init", "gram_update", "gram_update_vec",
           "ridge_solve", "ridge_vector", "eig_extremes"]


@dataclass
class GramState:
    sigma: np.ndarray      # (d, d) regularized Gram, always PD
    moment: np.ndarray     # (d,) accumulated feature * response
    t: int                 # number of online observations folded in
    lam: float             # ridge weight
    includes_offline: bool
    d1: int                # block boundary for the (alpha, beta) split

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def raw_gram(self) -> np.ndarray:
        """The Gram without its lam*I floor."""
        return self.sigma - self.lam * np.eye(self.d)


def gram_init(lam: float, d: int, sigma0: np.ndarray | None = None,
              moment0: np.ndarray | None = None, d1: int | None = None) -> GramState:
    """Fresh state sigma = lam*I (+ offline Gram), moment = 0 (+ offline moment).

    d1 marks where alpha ends and beta begins in the stacked parameter;
    it defaults to d - 1 (scalar elasticity).
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    sigma = lam * np.eye(d)
    moment = np.zeros(d)
    includes_offline = sigma0 is not None
    if sigma0 is not None:
        sigma = sigma + np.asarray(sigma0, dtype=float)
    if moment0 is not None:
        moment = moment + np.asarray(moment0, dtype=float)
    return GramState(sigma=sigma, moment=moment, t=0, lam=float(lam),
                     includes_offline=includes_offline,
                     d1=(d - 1) if d1 is None else int(d1))


def gram_update_vec(state: GramState, a: np.ndarray, response: float) -> GramState:
    """Fold one raw feature vector and its response into the state, in place."""
    state.sigma += np.outer(a, a)
    state.moment += a * response
    state.t += 1
    return state


def gram_update(state: GramState, ctx: Context, p: float, demand: float) -> GramState:
    """Fold one observation (ctx, p, demand) into the state, in place."""
    return gram_update_vec(state, demand_features(ctx, p), demand)


def ridge_vector(state: GramState) -> np.ndarray:
    """The ridge estimate sigma^{-1} moment via an SPD solve (never inversion).

    Raises a numeric error (LinAlgError) if the stored matrix has been
    corrupted into something non positive definite.
    """
    c, low = cho_factor(state.sigma, lower=True, check_finite=False)
    return cho_solve((c, low), state.moment, check_finite=False)


def ridge_solve(state: GramState) -> DemandParams:
    """ridge_vector split into (alpha, beta) at the state's block boundary."""
    return DemandParams.from_vector(ridge_vector(state), state.d1)


def eig_extremes(m: np.ndarray):
    """(lam_min, lam_max) of a symmetric matrix, symmetrizing first."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    sym = 0.5 * (m + m.T)
    vals = np.linalg.eigvalsh(sym)
    return float(vals[0]), float(vals[-1])
