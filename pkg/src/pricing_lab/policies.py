"""Pricing policies behind one choose/observe interface.

The optimistic family (the three-ellipsoid offline-online policy, its
general-elasticity two-ellipsoid variant, the restarting test-then-commit
policy, and the UCB baselines) rebuilds its confidence set from fresh
radii every round and grid-maximizes the optimistic revenue. Thompson
sampling, the offline greedy rule, and the clairvoyant round out the
baselines. Policies only ever see (context, price, demand); everything
else about the environment stays behind the harness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from . import rngs
from .confidence import (ConfidenceSet, Ellipsoid, NormBox, feasible_point,
                         min_price_fit, price_ucb_max, radius_f, radius_w_t,
                         radius_w_tN, radius_what_tN)
from .estimation import eig_extremes, gram_init, gram_update, ridge_vector
from .model import (Context, DemandParams, ProblemSpec, optimal_price,
                    project_price)
from .offline import OfflineDataset, OfflineSummary, demand_moment, phat_batch

__all__ = [
    "ContractViolation",
    "PolicyHandle",
    "Co3Config",
    "Rco3Config",
    "co3_new",
    "gco3_new",
    "rco3_new",
    "ucb_new",
    "ucb_offline_new",
    "ts_new",
    "ts_offline_new",
    "greedy_offline_new",
    "clairvoyant_new",
    "POLICY_KINDS",
]


class ContractViolation(RuntimeError):
    """choose_price/observe were not called in strict alternation."""


@dataclass(frozen=True)
class Co3Config:
    """Shared knobs of the optimistic policies.

    eps defaults to 1/T^2 when left as None. v_bound is the known bias
    bound V; the pure-online baseline ignores it.
    """

    T: int
    v_bound: float = 0.0
    lam: float = 1.0
    eps: Optional[float] = None
    grid_size: int = 512
    restarts: int = 4

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be positive")
        if self.v_bound < 0:
            raise ValueError("v_bound must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.eps is None:
            object.__setattr__(self, "eps", 1.0 / self.T ** 2)
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")


@dataclass(frozen=True)
class Rco3Config:
    """Test-then-commit configuration; the test runs ceil(test_scale * T^alpha_exp) rounds."""

    T: int
    alpha_exp: float = 0.25
    lam: float = 1.0
    eps: Optional[float] = None
    grid_size: int = 512
    test_scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha_exp < 0.5):
            raise ValueError("alpha_exp must lie in (0, 1/2)")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.eps is None:
            object.__setattr__(self, "eps", 1.0 / self.T ** 2)
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if not self.test_scale > 0:
            raise ValueError("test_scale must be positive")
        if self.t_test >= self.T:
            raise ValueError("test phase (%d rounds) must be shorter than the horizon %d"
                             % (self.t_test, self.T))

    @property
    def t_test(self) -> int:
        return int(math.ceil(self.test_scale * self.T ** self.alpha_exp))


class PolicyHandle:
    """Base handle enforcing the choose/observe alternation contract."""

    kind = "abstract"

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self._pending = False
        self.rounds = 0

    def choose_price(self, ctx: Context) -> float:
        if self._pending:
            raise ContractViolation(
                "%s: choose_price called again before observe" % self.kind)
        p = self._choose(ctx)
        self._pending = True
        return p

    def observe(self, ctx: Context, p: float, demand: float) -> None:
        if not self._pending:
            raise ContractViolation(
                "%s: observe without a pending choose_price" % self.kind)
        self._observe(ctx, p, demand)
        self._pending = False
        self.rounds += 1

    def _choose(self, ctx: Context) -> float:
        raise NotImplementedError

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Optimistic policies


class _OfuBase(PolicyHandle):
    """Shared plumbing: Gram states, set assembly, grid UCB pricing."""

    def __init__(self, spec: ProblemSpec, cfg: Co3Config,
                 data: Optional[OfflineDataset], summary: Optional[OfflineSummary]):
        super().__init__(spec)
        self.cfg = cfg
        self.box = NormBox.from_spec(spec)
        d = spec.d
        self.online = gram_init(cfg.lam, d, d1=spec.d1)
        if summary is not None:
            self.offline_summary = summary
            self.combined = gram_init(cfg.lam, d, sigma0=summary.sigma_hat,
                                      moment0=demand_moment(data), d1=spec.d1)
        else:
            self.offline_summary = None
            self.combined = None

    def _radius_args(self):
        return (self.online.t, self.cfg.lam, self.cfg.eps, self.spec.d,
                self.spec.feature_bound)

    def _w_t(self) -> float:
        t, lam, eps, d, L = self._radius_args()
        return radius_w_t(t, lam, eps, d, L, self.spec)

    def _w_tN(self) -> float:
        t, lam, eps, d, L = self._radius_args()
        s = self.offline_summary
        return radius_w_tN(t, lam, eps, d, L, self.cfg.v_bound,
                           s.lam_min, s.lam_max, self.spec.noise_R, self.spec)

    def _what_tN(self) -> float:
        t, lam, eps, d, L = self._radius_args()
        s = self.offline_summary
        return radius_what_tN(t, lam, eps, d, L, self.cfg.v_bound,
                              s.lam_min, self.spec.noise_R, self.spec)

    def _online_ellipsoid(self) -> Ellipsoid:
        return Ellipsoid(center=ridge_vector(self.online),
                         shape=self.online.sigma.copy(), radius=self._w_t())

    def _update_grams(self, ctx: Context, p: float, demand: float) -> None:
        gram_update(self.online, ctx, p, demand)
        if self.combined is not None:
            gram_update(self.combined, ctx, p, demand)

    def _ofu_price(self, ctx: Context, conf: ConfidenceSet,
                   check_box: bool) -> float:
        if check_box and feasible_point(conf, self.box) is None:
            return self.spec.l
        p, _ = price_ucb_max(conf, ctx, self.spec, self.cfg.grid_size)
        return p


class Co3Policy(_OfuBase):
    """Offline test, then either the offline greedy rule or three-ellipsoid OFU.

    The line-1 decision is made once at construction and never revisited:
    mode is "greedy" or "ofu" for the whole horizon.
    """

    kind = "co3"

    def __init__(self, data: OfflineDataset, summary: OfflineSummary,
                 cfg: Co3Config, spec: ProblemSpec,
                 fit_rng: Optional[np.random.Generator] = None):
        if spec.d2 != 1:
            raise ValueError("scalar-elasticity policy requires d2 = 1, got %d" % spec.d2)
        super().__init__(spec, cfg, data, summary)
        self.fit_value: Optional[float] = None
        self.fit_threshold: Optional[float] = None
        self.mode = "ofu"
        inv_disp = (1.0 / summary.lam_min) if summary.lam_min > 0 else math.inf
        cap = max(cfg.v_bound ** 2, inv_disp)
        self.cap = cap
        if cap <= cfg.T ** (-0.5) and summary.a_hat is not None:
            self.fit_threshold = (data.n * spec.x_max ** 2 * spec.y_max ** 2
                                  / (spec.y_min ** 2 * spec.lambda_min_Exx) * cap)
            conf = self.confidence_set()
            q = phat_batch(summary, data.xs, data.ys)
            self.fit_value = min_price_fit(conf, self.box, data.xs, data.ys,
                                           q, spec, restarts=cfg.restarts,
                                           rng=fit_rng)
            if self.fit_value <= self.fit_threshold:
                self.mode = "greedy"

    def confidence_set(self) -> ConfidenceSet:
        center = ridge_vector(self.combined)
        e1 = Ellipsoid(center=center, shape=self.combined.sigma.copy(),
                       radius=self._w_tN())
        e2 = Ellipsoid(center=center, shape=None, radius=self._what_tN())
        return ConfidenceSet((e1, e2, self._online_ellipsoid()), box=self.box)

    def _choose(self, ctx: Context) -> float:
        if self.mode == "greedy":
            ph = float(self.offline_summary.a_hat @ ctx.x / ctx.y[0])
            return project_price(ph, self.spec)
        return self._ofu_price(ctx, self.confidence_set(), check_box=True)

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        if self.mode == "ofu":
            self._update_grams(ctx, p, demand)


class Gco3Policy(_OfuBase):
    """Two-ellipsoid OFU for any elasticity dimension; no greedy test."""

    kind = "gco3"

    def __init__(self, data: OfflineDataset, summary: OfflineSummary,
                 cfg: Co3Config, spec: ProblemSpec):
        super().__init__(spec, cfg, data, summary)

    def confidence_set(self) -> ConfidenceSet:
        center = ridge_vector(self.combined)
        ball = Ellipsoid(center=center, shape=None, radius=self._what_tN())
        return ConfidenceSet((ball, self._online_ellipsoid()), box=self.box)

    def _choose(self, ctx: Context) -> float:
        return self._ofu_price(ctx, self.confidence_set(), check_box=True)

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        self._update_grams(ctx, p, demand)


class UcbPolicy(_OfuBase):
    """Pure-online single-ellipsoid optimism; ignores offline data entirely."""

    kind = "ucb"

    def __init__(self, cfg: Co3Config, spec: ProblemSpec):
        super().__init__(spec, cfg, None, None)

    def confidence_set(self) -> ConfidenceSet:
        return ConfidenceSet((self._online_ellipsoid(),))

    def _choose(self, ctx: Context) -> float:
        p, _ = price_ucb_max(self.confidence_set(), ctx, self.spec,
                             self.cfg.grid_size)
        return p

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        self._update_grams(ctx, p, demand)


class UcbOfflinePolicy(_OfuBase):
    """Single combined ellipsoid with the bias-blind radius (V = 0).

    Without offline rows the offline noise terms have nothing to account
    for and the construction reduces exactly to the pure-online policy.
    """

    kind = "ucb_offline"

    def __init__(self, data: Optional[OfflineDataset],
                 summary: Optional[OfflineSummary],
                 cfg: Co3Config, spec: ProblemSpec):
        if summary is not None and cfg.v_bound != 0.0:
            cfg = Co3Config(T=cfg.T, v_bound=0.0, lam=cfg.lam, eps=cfg.eps,
                            grid_size=cfg.grid_size, restarts=cfg.restarts)
        super().__init__(spec, cfg, data, summary)

    def confidence_set(self) -> ConfidenceSet:
        if self.combined is None:
            return ConfidenceSet((self._online_ellipsoid(),))
        center = ridge_vector(self.combined)
        e = Ellipsoid(center=center, shape=self.combined.sigma.copy(),
                      radius=self._w_tN())
        return ConfidenceSet((e,))

    def _choose(self, ctx: Context) -> float:
        p, _ = price_ucb_max(self.confidence_set(), ctx, self.spec,
                             self.cfg.grid_size)
        return p

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        self._update_grams(ctx, p, demand)


class Rco3Policy(PolicyHandle):
    """Uniform {l, u} test phase, then commit: offline greedy or fresh online UCB.

    After the test phase the policy compares the offline-only estimate
    against the test-phase estimate; agreement within 2f commits to greedy
    pricing under the offline estimate, disagreement starts a pure online
    policy from scratch for the remaining rounds.
    """

    kind = "rco3"

    def __init__(self, data: OfflineDataset, summary: OfflineSummary,
                 cfg: Rco3Config, spec: ProblemSpec, rng: np.random.Generator):
        super().__init__(spec)
        self.cfg = cfg
        self.rng = rng
        self.t_test = cfg.t_test
        self.branch: Optional[str] = None
        self.offline_summary = summary
        self._offline_state = gram_init(cfg.lam, spec.d, sigma0=summary.sigma_hat,
                                        moment0=demand_moment(data), d1=spec.d1)
        self.theta_offline = ridge_vector(self._offline_state)
        self._test_state = gram_init(cfg.lam, spec.d, d1=spec.d1)
        self._online: Optional[UcbPolicy] = None
        self._greedy_params: Optional[DemandParams] = None
        self.detect_stat: Optional[float] = None
        self.detect_threshold: Optional[float] = None

    def _choose(self, ctx: Context) -> float:
        if self.rounds < self.t_test:
            return self.spec.u if self.rng.integers(0, 2) == 1 else self.spec.l
        if self.branch is None:
            self._decide()
        if self.branch == "greedy":
            return self._greedy_price(ctx)
        return self._online.choose_price(ctx)

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        if self.rounds < self.t_test:
            gram_update(self._test_state, ctx, p, demand)
        elif self.branch == "online":
            self._online.observe(ctx, p, demand)

    def _decide(self) -> None:
        theta_test = ridge_vector(self._test_state)
        lam_min_test, _ = eig_extremes(self._test_state.raw_gram())
        f = radius_f(self.cfg.lam, self.cfg.eps, self.spec.d, self.spec.noise_R,
                     self.offline_summary.lam_min, max(lam_min_test, 0.0),
                     self.spec)
        self.detect_stat = float(np.linalg.norm(self.theta_offline - theta_test))
        self.detect_threshold = 2.0 * f
        if self.detect_stat <= self.detect_threshold:
            self.branch = "greedy"
            self._greedy_params = DemandParams.from_vector(self.theta_offline,
                                                           self.spec.d1)
        else:
            self.branch = "online"
            ucb_cfg = Co3Config(T=self.cfg.T, v_bound=0.0, lam=self.cfg.lam,
                                eps=self.cfg.eps, grid_size=self.cfg.grid_size)
            self._online = UcbPolicy(ucb_cfg, self.spec)

    def _greedy_price(self, ctx: Context) -> float:
        a = float(self._greedy_params.alpha @ ctx.x)
        s = float(self._greedy_params.beta @ ctx.y)
        spec = self.spec
        if s < 0.0:
            return project_price(-a / (2.0 * s), spec)
        rev_l = spec.l * (a + s * spec.l)
        rev_u = spec.u * (a + s * spec.u)
        return spec.u if rev_u > rev_l else spec.l


# ---------------------------------------------------------------------------
# Thompson sampling


class TsPolicy(PolicyHandle):
    """Gaussian-conjugate Thompson sampling with known noise scale.

    Maintains the posterior in natural parameters (precision, shift); each
    round samples a parameter, prices at its projected vertex, and guards
    the degenerate case of a sampled nonnegative elasticity by charging u.
    """

    kind = "ts"

    def __init__(self, prior_mean: np.ndarray, prior_cov_scale: float,
                 noise_sigma: float, spec: ProblemSpec,
                 rng: np.random.Generator,
                 prior_precision: Optional[np.ndarray] = None,
                 prior_shift: Optional[np.ndarray] = None):
        super().__init__(spec)
        if noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        self.rng = rng
        self.noise_var = noise_sigma ** 2
        d = spec.d
        self.prior_mean = np.asarray(prior_mean, dtype=float)
        self.degenerate = prior_cov_scale == 0.0 and prior_precision is None
        if self.degenerate:
            self.precision = None
            self.shift = None
        elif prior_precision is not None:
            self.precision = np.array(prior_precision, dtype=float)
            self.shift = np.array(prior_shift, dtype=float)
        else:
            if prior_cov_scale < 0:
                raise ValueError("prior_cov_scale must be nonnegative")
            self.precision = np.eye(d) / prior_cov_scale
            self.shift = self.precision @ self.prior_mean

    def posterior_mean(self) -> np.ndarray:
        if self.degenerate:
            return self.prior_mean.copy()
        c, low = cho_factor(self.precision, lower=True, check_finite=False)
        return cho_solve((c, low), self.shift, check_finite=False)

    def _sample(self) -> np.ndarray:
        if self.degenerate:
            return self.prior_mean
        chol = np.linalg.cholesky(self.precision)
        mean = cho_solve((chol, True), self.shift, check_finite=False)
        xi = self.rng.standard_normal(mean.shape[0])
        return mean + solve_triangular(chol.T, xi, lower=False, check_finite=False)

    def _choose(self, ctx: Context) -> float:
        theta = self._sample()
        d1 = self.spec.d1
        s = float(theta[d1:] @ ctx.y)
        if s >= 0.0:
            return self.spec.u
        a = float(theta[:d1] @ ctx.x)
        return project_price(-a / (2.0 * s), self.spec)

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        if self.degenerate:
            return
        a = np.concatenate([ctx.x, ctx.y * p])
        self.precision += np.outer(a, a) / self.noise_var
        self.shift += a * (demand / self.noise_var)


# ---------------------------------------------------------------------------
# Non-learning baselines


class GreedyOfflinePolicy(PolicyHandle):
    """Always charges the projected offline empirical price."""

    kind = "greedy_offline"

    def __init__(self, summary: OfflineSummary, spec: ProblemSpec):
        super().__init__(spec)
        if summary.d2 != 1:
            raise ValueError("offline greedy pricing requires d2 = 1")
        if summary.a_hat is None:
            raise ValueError("offline greedy pricing needs a nonsingular x-Gram")
        self.summary = summary

    def _choose(self, ctx: Context) -> float:
        ph = float(self.summary.a_hat @ ctx.x / ctx.y[0])
        return project_price(ph, self.spec)

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        pass


class ClairvoyantPolicy(PolicyHandle):
    """Prices with full knowledge of the true parameter; the regret benchmark."""

    kind = "clairvoyant"

    def __init__(self, theta_star: DemandParams, spec: ProblemSpec):
        super().__init__(spec)
        self.theta_star = theta_star

    def _choose(self, ctx: Context) -> float:
        return optimal_price(self.theta_star, ctx, self.spec)

    def _observe(self, ctx: Context, p: float, demand: float) -> None:
        pass


# ---------------------------------------------------------------------------
# Factories


def co3_new(data: OfflineDataset, summary: OfflineSummary, cfg: Co3Config,
            spec: ProblemSpec,
            fit_rng: Optional[np.random.Generator] = None) -> Co3Policy:
    return Co3Policy(data, summary, cfg, spec, fit_rng=fit_rng)


def gco3_new(data: OfflineDataset, summary: OfflineSummary, cfg: Co3Config,
             spec: ProblemSpec) -> Gco3Policy:
    return Gco3Policy(data, summary, cfg, spec)


def rco3_new(data: OfflineDataset, summary: OfflineSummary, cfg: Rco3Config,
             spec: ProblemSpec, rng: np.random.Generator) -> Rco3Policy:
    return Rco3Policy(data, summary, cfg, spec, rng)


def ucb_new(cfg: Co3Config, spec: ProblemSpec) -> UcbPolicy:
    return UcbPolicy(cfg, spec)


def ucb_offline_new(data: Optional[OfflineDataset],
                    summary: Optional[OfflineSummary],
                    cfg: Co3Config, spec: ProblemSpec) -> UcbOfflinePolicy:
    return UcbOfflinePolicy(data, summary, cfg, spec)


def ts_new(prior_mean: np.ndarray, prior_cov_scale: float, noise_sigma: float,
           spec: ProblemSpec, rng: np.random.Generator) -> TsPolicy:
    return TsPolicy(prior_mean, prior_cov_scale, noise_sigma, spec, rng)


def ts_offline_new(data: OfflineDataset, summary: OfflineSummary, lam: float,
                   noise_sigma: float, spec: ProblemSpec,
                   rng: np.random.Generator,
                   prior_cov_scale: float = 1.0) -> TsPolicy:
    """Thompson sampling whose prior is the offline ridge posterior.

    Prior mean theta_{0,N}, covariance prior_cov_scale * sigma^2 *
    Sigma_{0,N}^{-1}; in natural parameters the precision is
    Sigma_{0,N} / (sigma^2 prior_cov_scale) and the shift is the offline
    moment divided by the same factor.
    """
    if prior_cov_scale <= 0:
        raise ValueError("prior_cov_scale must be positive")
    state = gram_init(lam, spec.d, sigma0=summary.sigma_hat,
                      moment0=demand_moment(data), d1=spec.d1)
    factor = noise_sigma ** 2 * prior_cov_scale
    precision = state.sigma / factor
    shift = state.moment / factor
    mean = ridge_vector(state)
    return TsPolicy(prior_mean=mean, prior_cov_scale=1.0,
                    noise_sigma=noise_sigma, spec=spec, rng=rng,
                    prior_precision=precision, prior_shift=shift)


def greedy_offline_new(summary: OfflineSummary, spec: ProblemSpec) -> GreedyOfflinePolicy:
    return GreedyOfflinePolicy(summary, spec)


def clairvoyant_new(theta_star: DemandParams, spec: ProblemSpec) -> ClairvoyantPolicy:
    return ClairvoyantPolicy(theta_star, spec)


POLICY_KINDS = ("co3", "gco3", "rco3", "ucb", "ucb_offline", "ts",
                "ts_offline", "greedy_offline", "clairvoyant")
