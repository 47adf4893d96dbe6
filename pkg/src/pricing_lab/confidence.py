"""Confidence radii, ellipsoid intersections, and optimistic maximization.

The radius formulas are the three closed forms w_t, w_{t,N}, what_{t,N}
(plus the test statistic f used by the restarting policy). Sets are
intersections of one to three ellipsoids, optionally together with the
parameter norm box; optimistic values use the per-ellipsoid closed form
center'c + radius * ||c||_{shape^{-1}}, whose min over ellipsoids is a
valid relaxation of the max over the intersection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from . import kernels
from .model import ProblemSpec

__all__ = [
    "Ellipsoid",
    "NormBox",
    "ConfidenceSet",
    "radius_w_t",
    "radius_w_tN",
    "radius_what_tN",
    "radius_f",
    "linear_max",
    "price_ucb_max",
    "feasible_point",
    "min_price_fit",
]

_MEMBER_TOL = 1e-9
_PROJ_PASSES = 64
_FEAS_ITERS = 200


def _param_scale(spec: ProblemSpec) -> float:
    return math.sqrt(spec.alpha_max ** 2 + spec.beta_max ** 2)


def _log_det_term(t: int, lam: float, eps: float, d: int, L: float, three_or_six: float) -> float:
    return math.sqrt(2.0 * math.log(three_or_six / eps)
                     + d * math.log1p(t * L * L / (d * lam)))


def radius_w_t(t: int, lam: float, eps: float, d: int, L: float, spec: ProblemSpec) -> float:
    """Radius of the online ellipsoid ||theta - theta_t||_{Sigma_t}."""
    return math.sqrt(lam) * _param_scale(spec) + _log_det_term(t, lam, eps, d, L, 3.0)


def radius_w_tN(t: int, lam: float, eps: float, d: int, L: float, V: float,
                lam_min_sig: float, lam_max_sig: float, R: float,
                spec: ProblemSpec) -> float:
    """Radius of the combined ellipsoid ||theta - theta_{t,N}||_{Sigma_{t,N}}."""
    s = _param_scale(spec)
    return (lam * s / math.sqrt(lam + lam_min_sig)
            + lam_max_sig * V / math.sqrt(lam + lam_max_sig)
            + _log_det_term(t, lam, eps, d, L, 6.0)
            + R * math.sqrt(d) + R * math.sqrt(2.0 * math.log(6.0 / eps)))


def radius_what_tN(t: int, lam: float, eps: float, d: int, L: float, V: float,
                   lam_min_sig: float, R: float, spec: ProblemSpec) -> float:
    """Radius of the plain Euclidean ball around the combined estimator."""
    s = _param_scale(spec)
    root = math.sqrt(lam + lam_min_sig)
    return (lam * s / (lam + lam_min_sig)
            + V
            + _log_det_term(t, lam, eps, d, L, 6.0) / root
            + (R * math.sqrt(d) + R * math.sqrt(2.0 * math.log(6.0 / eps))) / root)


def radius_f(lam: float, eps: float, d: int, R: float,
             lam_min_sig: float, lam_min_test: float, spec: ProblemSpec) -> float:
    """Detection threshold statistic for the test-then-commit policy.

    lam_min_sig is the smallest eigenvalue of the offline Gram,
    lam_min_test that of the (unregularized) test-phase Gram.
    """
    s = _param_scale(spec)
    noise = R * math.sqrt(d) + R * math.sqrt(2.0 * math.log(3.0 / eps))
    total = 0.0
    for lmin in (lam_min_sig, lam_min_test):
        total += lam * s / (lam + lmin) + noise / math.sqrt(lam + lmin)
    return total


# ---------------------------------------------------------------------------
# Set geometry


@dataclass(frozen=True)
class Ellipsoid:
    """{theta : ||theta - center||_shape <= radius}; shape None means a ball."""

    center: np.ndarray
    shape: Optional[np.ndarray]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.shape is not None:
            m = np.asarray(self.shape, dtype=float)
            object.__setattr__(self, "shape", m)
            object.__setattr__(self, "_chol", cholesky(m, lower=True, check_finite=False))
        else:
            object.__setattr__(self, "_chol", None)

    @property
    def chol(self) -> Optional[np.ndarray]:
        return self._chol  # type: ignore[attr-defined]

    def norm_to(self, theta: np.ndarray) -> float:
        """||theta - center|| in the ellipsoid's metric."""
        v = theta - self.center
        if self.shape is None:
            return float(np.linalg.norm(v))
        return float(np.sqrt(v @ (self.shape @ v)))

    def contains(self, theta: np.ndarray, tol: float = _MEMBER_TOL) -> bool:
        return self.norm_to(theta) <= self.radius * (1.0 + tol) + tol

    def project(self, theta: np.ndarray) -> np.ndarray:
        """Radial scaling toward the center in the ellipsoid's metric."""
        dist = self.norm_to(theta)
        if dist <= self.radius:
            return theta
        return self.center + (theta - self.center) * (self.radius / dist)

    def dual_norm(self, c: np.ndarray) -> float:
        """||c||_{shape^{-1}}, the support-function slack direction weight."""
        if self.shape is None:
            return float(np.linalg.norm(c))
        z = solve_triangular(self._chol, c, lower=True, check_finite=False)  # type: ignore[attr-defined]
        return float(np.linalg.norm(z))


@dataclass(frozen=True)
class NormBox:
    """Per-block parameter bounds ||alpha|| <= alpha_max, ||beta|| <= beta_max."""

    d1: int
    alpha_max: float
    beta_max: float

    def contains(self, theta: np.ndarray, tol: float = _MEMBER_TOL) -> bool:
        a = float(np.linalg.norm(theta[:self.d1]))
        b = float(np.linalg.norm(theta[self.d1:]))
        return (a <= self.alpha_max * (1.0 + tol) + tol
                and b <= self.beta_max * (1.0 + tol) + tol)

    def project(self, theta: np.ndarray) -> np.ndarray:
        out = np.array(theta, dtype=float)
        a = np.linalg.norm(out[:self.d1])
        if a > self.alpha_max:
            out[:self.d1] *= self.alpha_max / a
        b = np.linalg.norm(out[self.d1:])
        if b > self.beta_max:
            out[self.d1:] *= self.beta_max / b
        return out

    @classmethod
    def from_spec(cls, spec: ProblemSpec) -> "NormBox":
        return cls(d1=spec.d1, alpha_max=spec.alpha_max, beta_max=spec.beta_max)


@dataclass(frozen=True)
class ConfidenceSet:
    """An intersection of ellipsoids, with an optional parameter box.

    Membership is the conjunction of the ellipsoid constraints; the box is
    kept separate so maximization can drop it (a valid enlargement) while
    feasibility tests keep it.
    """

    ellipsoids: Tuple[Ellipsoid, ...]
    box: Optional[NormBox] = None

    def __post_init__(self):
        object.__setattr__(self, "ellipsoids", tuple(self.ellipsoids))
        if len(self.ellipsoids) == 0:
            raise ValueError("a confidence set needs at least one ellipsoid")
        d = self.ellipsoids[0].center.shape[0]
        centers = np.stack([e.center for e in self.ellipsoids])
        chols = np.stack([np.eye(d) if e.chol is None else e.chol
                          for e in self.ellipsoids])
        radii = np.array([e.radius for e in self.ellipsoids])
        is_ball = np.array([e.shape is None for e in self.ellipsoids], dtype=np.uint8)
        object.__setattr__(self, "_arrays", (centers, chols, radii, is_ball))

    @property
    def dim(self) -> int:
        return self.ellipsoids[0].center.shape[0]

    def kernel_arrays(self):
        return self._arrays  # type: ignore[attr-defined]

    def contains(self, theta: np.ndarray, tol: float = _MEMBER_TOL) -> bool:
        return all(e.contains(theta, tol) for e in self.ellipsoids)


def linear_max(conf: ConfidenceSet, c: np.ndarray) -> float:
    """Relaxed max of c'theta over the intersection.

    min over ellipsoids of (center'c + radius ||c||_{shape^{-1}}): an upper
    bound for every point in the intersection, and the exact maximum when
    there is a single ellipsoid.
    """
    c = np.asarray(c, dtype=float)
    best = math.inf
    for e in conf.ellipsoids:
        best = min(best, float(e.center @ c) + e.radius * e.dual_norm(c))
    return best


def price_ucb_max(conf: ConfidenceSet, ctx, spec: ProblemSpec,
                  grid_size: int) -> Tuple[float, float]:
    """Grid search of the optimistic revenue over [l, u].

    Returns (price, optimistic value); ties break toward the smallest
    price. If the true parameter lies in the set, the returned value upper
    bounds the true revenue at every grid price.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    prices = np.linspace(spec.l, spec.u, grid_size)
    centers, chols, radii, is_ball = conf.kernel_arrays()
    idx, val = kernels.ucb_price_argmax(prices, ctx.x, ctx.y,
                                        centers, chols, radii, is_ball)
    return float(prices[idx]), val


def _constraints(conf: ConfidenceSet, box: Optional[NormBox]):
    cons: list = list(conf.ellipsoids)
    if box is not None:
        cons.append(box)
    return cons


def _cyclic_project(theta: np.ndarray, cons, passes: int = _PROJ_PASSES):
    """Cyclic projections onto every constraint; returns (point, feasible)."""
    cur = np.array(theta, dtype=float)
    for _ in range(passes):
        moved = False
        for c in cons:
            if not c.contains(cur, tol=1e-12):
                cur = c.project(cur)
                moved = True
        if not moved:
            return cur, True
    return cur, all(c.contains(cur) for c in cons)


def feasible_point(conf: ConfidenceSet, box: Optional[NormBox],
                   restarts: int = 8) -> Optional[np.ndarray]:
    """A point of the intersection (with the box), or None.

    Candidate centers are tried first, then cyclic projection runs from
    each of them; absence of convergence within the budget reports the set
    as (numerically) empty, which callers treat as the fallback branch.
    """
    cons = _constraints(conf, box)
    starts = []
    for e in conf.ellipsoids:
        starts.append(e.center)
        if box is not None:
            starts.append(box.project(e.center))
    starts.append(np.mean([e.center for e in conf.ellipsoids], axis=0))
    for s in starts:
        if all(c.contains(s) for c in cons):
            return np.array(s, dtype=float)
    rng = np.random.Generator(np.random.Philox(0))
    scale = max(e.radius for e in conf.ellipsoids)
    for attempt in range(max(1, restarts)):
        base = starts[attempt % len(starts)]
        jitter = rng.normal(0.0, 0.1 * max(scale, 1e-12), size=base.shape) if attempt else 0.0
        cand, ok = _cyclic_project(base + jitter, cons, passes=_FEAS_ITERS)
        if ok:
            return cand
    return None


def _fit_objective_grad(theta: np.ndarray, d1: int, xs: np.ndarray,
                        ys: np.ndarray, q: np.ndarray):
    """Value and gradient of sum_n (q_n - p*_theta(x_n, y_n))^2, d2 = 1.

    p*_theta is the unprojected vertex -alpha'x / (2 beta y); parameters
    with nonnegative elasticity on any offline row get value +inf (the
    vertex is undefined there, and such parameters cannot be optimal).
    """
    alpha = theta[:d1]
    beta = theta[d1]
    a = xs @ alpha
    s = beta * ys
    if np.any(s >= 0.0):
        return math.inf, None
    g = -a / (2.0 * s)
    e = g - q
    val = float(e @ e)
    grad = np.empty(d1 + 1)
    grad[:d1] = -xs.T @ (e / s)
    grad[d1] = float(np.sum(e * a * ys / (s * s)))
    return val, grad


def min_price_fit(conf: ConfidenceSet, box: Optional[NormBox],
                  offline_xs: np.ndarray, offline_ys: np.ndarray,
                  phat_values: np.ndarray, spec: ProblemSpec,
                  restarts: int = 4,
                  rng: Optional[np.random.Generator] = None) -> float:
    """Approximate min over the set of the offline price-fit objective.

    Projected gradient descent with cyclic projections, multi-started from
    the set's candidate points plus random feasible perturbations. Returns
    the best objective value found, an upper bound on the true minimum
    (the conservative direction for the greedy-branch test); returns +inf
    when no feasible start is found (the empty-set signal).
    """
    if spec.d2 != 1:
        raise ValueError("price-fit objective requires scalar elasticity")
    xs = np.asarray(offline_xs, dtype=float)
    ys = np.asarray(offline_ys, dtype=float).reshape(-1)
    q = np.asarray(phat_values, dtype=float)
    d1 = spec.d1
    cons = _constraints(conf, box)
    if rng is None:
        rng = np.random.Generator(np.random.Philox(1))

    starts = []
    base = feasible_point(conf, box)
    if base is not None:
        starts.append(base)
    for e in conf.ellipsoids:
        cand, ok = _cyclic_project(e.center, cons)
        if ok:
            starts.append(cand)
    scale = max(e.radius for e in conf.ellipsoids)
    tries = 0
    while len(starts) < max(1, restarts) and tries < 8 * max(1, restarts):
        tries += 1
        anchor = starts[0] if starts else conf.ellipsoids[0].center
        cand, ok = _cyclic_project(
            anchor + rng.normal(0.0, 0.25 * max(scale, 1e-12), size=conf.dim), cons)
        if ok:
            starts.append(cand)
    if not starts:
        return math.inf

    best = math.inf
    for theta0 in starts[:max(1, restarts)]:
        theta = np.array(theta0, dtype=float)
        val, grad = _fit_objective_grad(theta, d1, xs, ys, q)
        if not math.isfinite(val):
            continue
        step = 1.0
        for _ in range(500):
            if grad is None:
                break
            gnorm = float(np.linalg.norm(grad))
            if gnorm == 0.0:
                break
            improved = False
            trial_step = step
            for _ in range(30):
                cand = theta - trial_step * grad
                cand, ok = _cyclic_project(cand, cons)
                if ok:
                    cval, cgrad = _fit_objective_grad(cand, d1, xs, ys, q)
                    if cval < val:
                        improvement = val - cval
                        theta, val, grad = cand, cval, cgrad
                        step = trial_step * 2.0
                        improved = True
                        break
                trial_step *= 0.5
            if not improved or improvement < 1e-10:
                break
        best = min(best, val)
    return best
