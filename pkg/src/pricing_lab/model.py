"""Linear demand market: parameters, contexts, revenue, optimal price, regret.

Demand is linear in the context features and the price,

    D = alpha'x + (beta'y) p + noise,

so expected revenue r(p) = p (alpha'x + (beta'y) p) is a concave quadratic
whenever the elasticity beta'y is negative, with unconstrained maximizer
p = -alpha'x / (2 beta'y). Prices are always projected to the admissible
interval [l, u] before being charged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DemandParams",
    "Context",
    "ProblemSpec",
    "DegenerateElasticityError",
    "revenue",
    "optimal_price",
    "step_regret",
    "project_price",
    "demand_features",
    "revenue_features",
]


class DegenerateElasticityError(ValueError):
    """Raised when the elasticity beta'y is not strictly negative."""


@dataclass(frozen=True)
class DemandParams:
    """Demand parameter pair theta = (alpha, beta).

    alpha : baseline-demand coefficients, length d1
    beta  : price-elasticity coefficients, length d2
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.alpha.ndim != 1 or self.beta.ndim != 1:
            raise ValueError("alpha and beta must be one-dimensional")
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))):
            raise ValueError("demand parameters must be finite")

    @property
    def d1(self) -> int:
        return self.alpha.shape[0]

    @property
    def d2(self) -> int:
        return self.beta.shape[0]

    def as_vector(self) -> np.ndarray:
        """Stacked parameter vector [alpha; beta]."""
        return np.concatenate([self.alpha, self.beta])

    @classmethod
    def from_vector(cls, vec: np.ndarray, d1: int) -> "DemandParams":
        vec = np.asarray(vec, dtype=float)
        return cls(alpha=vec[:d1].copy(), beta=vec[d1:].copy())


@dataclass(frozen=True)
class Context:
    """One market context: baseline feature x (d1) and elasticity feature y (d2)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.ndim != 1 or self.y.ndim != 1:
            raise ValueError("context features must be one-dimensional")


@dataclass(frozen=True)
class ProblemSpec:
    """Known problem constants: parameter/feature bounds, price interval, noise.

    The admissible price interval is derived from the revenue bounds,
    l = l_alpha / (2 u_beta) and u = u_alpha / (2 l_beta), which is where
    the optimal price is guaranteed to live for any admissible instance.

    noise_R is the demand noise scale (implemented as a Gaussian standard
    deviation). lambda_min_Exx is the smallest eigenvalue of the context
    second-moment matrix E[xx'], treated as a known constant.
    """

    d1: int
    d2: int
    alpha_max: float
    beta_max: float
    x_max: float
    y_max: float
    y_min: float
    l_alpha: float
    u_alpha: float
    l_beta: float
    u_beta: float
    noise_R: float
    lambda_min_Exx: float

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("d1 and d2 must be positive integers")
        for name in ("alpha_max", "beta_max", "x_max", "y_max", "y_min",
                     "l_alpha", "u_alpha", "l_beta", "u_beta",
                     "lambda_min_Exx"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be positive" % name)
        if self.noise_R < 0:
            raise ValueError("noise_R must be nonnegative")
        if self.l_alpha > self.u_alpha or self.l_beta > self.u_beta:
            raise ValueError("demand bounds must satisfy l_alpha <= u_alpha, l_beta <= u_beta")
        if not (0.0 < self.l < self.u):
            raise ValueError("price interval must satisfy 0 < l < u")

    @property
    def l(self) -> float:
        """Lower end of the admissible price interval."""
        return self.l_alpha / (2.0 * self.u_beta)

    @property
    def u(self) -> float:
        """Upper end of the admissible price interval."""
        return self.u_alpha / (2.0 * self.l_beta)

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def feature_bound(self) -> float:
        """Largest norm of the demand feature [x; y p] over contexts and p in [l, u]."""
        return float(np.sqrt(self.x_max ** 2 + (self.y_max * self.u) ** 2))


def _check_dims(theta: DemandParams, ctx: Context) -> None:
    if theta.alpha.shape != ctx.x.shape or theta.beta.shape != ctx.y.shape:
        raise ValueError(
            "dimension mismatch: theta is (%d, %d), context is (%d, %d)"
            % (theta.d1, theta.d2, ctx.x.shape[0], ctx.y.shape[0])
        )


def revenue(theta: DemandParams, p: float, ctx: Context) -> float:
    """Expected revenue p * (alpha'x + (beta'y) p) from charging price p."""
    _check_dims(theta, ctx)
    if not np.isfinite(p):
        raise ValueError("price must be finite")
    return float(p * (theta.alpha @ ctx.x + (theta.beta @ ctx.y) * p))


def project_price(p: float, spec: ProblemSpec) -> float:
    """Clip a price to the admissible interval [l, u]."""
    return float(min(max(p, spec.l), spec.u))


def optimal_price(theta: DemandParams, ctx: Context, spec: ProblemSpec) -> float:
    """Revenue-maximizing price -alpha'x / (2 beta'y), projected to [l, u].

    For parameters and contexts obeying the problem bounds the unprojected
    ratio already lies inside [l, u]; the projection is numerical safety.
    Raises DegenerateElasticityError if the elasticity beta'y is >= 0
    (the revenue quadratic would be unbounded on the upside).
    """
    _check_dims(theta, ctx)
    by = float(theta.beta @ ctx.y)
    if by >= 0.0:
        raise DegenerateElasticityError(
            "elasticity beta'y = %g is not negative; optimal price undefined" % by
        )
    p_star = -(theta.alpha @ ctx.x) / (2.0 * by)
    return project_price(float(p_star), spec)


def step_regret(theta_star: DemandParams, p: float, ctx: Context, spec: ProblemSpec) -> float:
    """One-round expected revenue gap to the clairvoyant price.

    Equals -(beta'y) (p - p*)^2 exactly whenever the optimal price is
    interior to [l, u]; always nonnegative.
    """
    p_star = optimal_price(theta_star, ctx, spec)
    gap = revenue(theta_star, p_star, ctx) - revenue(theta_star, p, ctx)
    return max(gap, 0.0)


def demand_features(ctx: Context, p: float) -> np.ndarray:
    """Regression feature [x; y p] of one observation at price p."""
    return np.concatenate([ctx.x, ctx.y * p])


def revenue_features(ctx: Context, p: float) -> np.ndarray:
    """Revenue direction c(p) = [p x; p^2 y], so that revenue = theta'c(p)."""
    return np.concatenate([ctx.x * p, ctx.y * (p * p)])
