"""Stochastic linear bandit over finite action sets with biased offline data.

The sanity-check companion of the pricing lab: rewards are plain inner
products, actions live in a ball of radius a_max, and the offline log is a
set of (action, reward) pairs generated under a parameter at most V away
from the truth. The offline-informed policy intersects a Euclidean ball
around the pooled estimate with the usual online ellipsoid; the radius
formulas are the pricing ones applied with L = a_max, d = dimension, and
parameter scale s_bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import kernels, rngs
from .confidence import (ConfidenceSet, Ellipsoid, radius_w_t,
                         radius_what_tN)
from .estimation import eig_extremes, gram_init, gram_update_vec, ridge_vector
from .harness import RegretTrace

__all__ = [
    "ActionSet",
    "LbPolicy",
    "LbClairvoyant",
    "LbEnvironment",
    "lb_policy_new",
    "lb_clairvoyant_new",
    "lb_build_env",
    "lb_select_action",
    "lb_update",
    "lb_run",
]

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ActionSet:
    """A finite menu of actions, rows of an (K, d) array, norms <= a_max."""

    actions: np.ndarray
    a_max: float

    def __post_init__(self):
        a = np.ascontiguousarray(np.atleast_2d(np.asarray(self.actions, dtype=float)))
        object.__setattr__(self, "actions", a)
        if a.shape[0] == 0:
            raise ValueError("action set is empty")
        norms = np.linalg.norm(a, axis=1)
        if norms.max() > self.a_max * (1.0 + _NORM_TOL):
            raise ValueError("action norm %.6g exceeds a_max=%.6g"
                             % (norms.max(), self.a_max))

    @property
    def k(self) -> int:
        return self.actions.shape[0]

    @property
    def d(self) -> int:
        return self.actions.shape[1]


@dataclass(frozen=True)
class _ScaleBounds:
    """Parameter-scale shim the shared radius formulas read bounds from."""

    alpha_max: float
    beta_max: float = 0.0


class LbPolicy:
    """Optimistic linear bandit; two ellipsoids when offline data is present."""

    def __init__(self, offline: Optional[Tuple[np.ndarray, np.ndarray]],
                 v_bound: float, lam: float, eps: float, T: int, d: int,
                 a_max: float, s_bound: float, noise_R: float):
        if not lam > 0:
            raise ValueError("lam must be positive")
        if not (0.0 < eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if v_bound < 0:
            raise ValueError("v_bound must be nonnegative")
        self.d = d
        self.lam = lam
        self.eps = eps
        self.T = T
        self.a_max = a_max
        self.v_bound = v_bound
        self.noise_R = noise_R
        self._scale = _ScaleBounds(alpha_max=s_bound)
        self.online = gram_init(lam, d)
        if offline is not None:
            acts = np.atleast_2d(np.asarray(offline[0], dtype=float)).reshape(-1, d)
            rews = np.asarray(offline[1], dtype=float).reshape(-1)
            if acts.shape[0] != rews.shape[0]:
                raise ValueError("offline actions and rewards disagree in length")
            sigma_hat = acts.T @ acts
            self.offline_lam_min, _ = eig_extremes(sigma_hat)
            self.offline_lam_min = max(self.offline_lam_min, 0.0)
            self.combined = gram_init(lam, d, sigma0=sigma_hat,
                                      moment0=acts.T @ rews)
            self.kind = "lb_offline_ucb"
        else:
            self.combined = None
            self.offline_lam_min = 0.0
            self.kind = "lb_ucb"
        self._pending = False
        self.rounds = 0

    def confidence_set(self) -> ConfidenceSet:
        t = self.online.t
        w_t = radius_w_t(t, self.lam, self.eps, self.d, self.a_max, self._scale)
        online = Ellipsoid(center=ridge_vector(self.online),
                           shape=self.online.sigma.copy(), radius=w_t)
        if self.combined is None:
            return ConfidenceSet((online,))
        what = radius_what_tN(t, self.lam, self.eps, self.d, self.a_max,
                              self.v_bound, self.offline_lam_min,
                              self.noise_R, self._scale)
        ball = Ellipsoid(center=ridge_vector(self.combined), shape=None,
                         radius=what)
        return ConfidenceSet((ball, online))


def lb_policy_new(offline: Optional[Tuple[np.ndarray, np.ndarray]],
                  v_bound: float, lam: float, eps: float, T: int, *,
                  d: int, a_max: float, s_bound: float,
                  noise_R: float) -> LbPolicy:
    """Handle over raw actions; offline=None gives the pure-online policy."""
    return LbPolicy(offline, v_bound, lam, eps, T, d, a_max, s_bound, noise_R)


class LbClairvoyant:
    """Selects the true argmax action; the zero-regret reference."""

    kind = "lb_clairvoyant"

    def __init__(self, theta_star: np.ndarray):
        self.theta_star = np.asarray(theta_star, dtype=float)
        self._pending = False
        self.rounds = 0

    def confidence_set(self) -> ConfidenceSet:
        return ConfidenceSet((Ellipsoid(center=self.theta_star.copy(),
                                        shape=None, radius=0.0),))


def lb_clairvoyant_new(theta_star: np.ndarray) -> LbClairvoyant:
    return LbClairvoyant(theta_star)


def lb_select_action(handle, actions: ActionSet) -> int:
    """Index of the action with the largest optimistic value; ties go low."""
    if handle._pending:
        raise RuntimeError("%s: select called again before update" % handle.kind)
    conf = handle.confidence_set()
    if actions.d != conf.dim:
        raise ValueError("action dimension %d does not match the policy's %d"
                         % (actions.d, conf.dim))
    cols = np.ascontiguousarray(actions.actions.T)
    centers, chols, radii, is_ball = conf.kernel_arrays()
    idx, _ = kernels.ucb_argmax(cols, centers, chols, radii, is_ball)
    handle._pending = True
    return int(idx)


def lb_update(handle, action: np.ndarray, reward: float) -> None:
    """Fold the observed (action, reward) pair into the policy state."""
    if not handle._pending:
        raise RuntimeError("%s: update without a pending selection" % handle.kind)
    a = np.asarray(action, dtype=float)
    if isinstance(handle, LbPolicy):
        gram_update_vec(handle.online, a, reward)
        if handle.combined is not None:
            gram_update_vec(handle.combined, a, reward)
    handle._pending = False
    handle.rounds += 1


@dataclass(frozen=True)
class LbEnvironment:
    theta_star: np.ndarray
    theta_prime: np.ndarray
    offline_actions: np.ndarray   # (N, d)
    offline_rewards: np.ndarray   # (N,)
    d: int
    k: int
    a_max: float
    noise_R: float

    @property
    def n_offline(self) -> int:
        return self.offline_actions.shape[0]

    def offline_pairs(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        if self.n_offline == 0:
            return None
        return (self.offline_actions, self.offline_rewards)


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def lb_build_env(d: int, k: int, n_offline: int, v_true: float,
                 noise_R: float, a_max: float, theta_norm: float,
                 master_seed: int, rep: int) -> LbEnvironment:
    """Sampled instance: theta on a sphere, offline log under a biased twin.

    Offline actions are i.i.d. uniform on the a_max sphere, so the offline
    Gram's smallest eigenvalue grows linearly in N.
    """
    theta = _unit_rows(rngs.stream(master_seed, rep, rngs.THETA), 1, d)[0] * theta_norm
    if v_true > 0:
        u = _unit_rows(rngs.stream(master_seed, rep, rngs.BIAS_DIR), 1, d)[0]
        theta_prime = theta + v_true * u
    else:
        theta_prime = theta.copy()
    off_rng = rngs.stream(master_seed, rep, rngs.OFFLINE)
    acts = _unit_rows(off_rng, n_offline, d) * a_max if n_offline else np.zeros((0, d))
    rews = acts @ theta_prime + off_rng.standard_normal(n_offline) * noise_R
    return LbEnvironment(theta_star=theta, theta_prime=theta_prime,
                         offline_actions=acts, offline_rewards=rews,
                         d=d, k=k, a_max=a_max, noise_R=noise_R)


def lb_run(env: LbEnvironment, handle, T: int, seed: int,
           rep: int = 0, name: Optional[str] = None) -> RegretTrace:
    """T rounds against fresh per-round action menus drawn from the seed.

    Regret increments are exact inner-product gaps against the true best
    action of each menu, ties resolved to the lowest index on both sides.
    """
    act_rng = rngs.stream(seed, rep, rngs.ONLINE_CTX)
    noise_rng = rngs.stream(seed, rep, rngs.ONLINE_NOISE)
    theta = env.theta_star
    instant = np.empty(T)
    for t in range(T):
        menu = ActionSet(_unit_rows(act_rng, env.k, env.d) * env.a_max,
                         env.a_max)
        true_vals = menu.actions @ theta
        best = float(true_vals.max())
        idx = lb_select_action(handle, menu)
        a = menu.actions[idx]
        reward = float(a @ theta + noise_rng.standard_normal() * env.noise_R)
        lb_update(handle, a, reward)
        instant[t] = best - float(true_vals[idx])
    kind = name or getattr(handle, "kind", "lb")
    return RegretTrace(policy=kind, rep=rep, instant=instant,
                       cum=np.cumsum(instant))
