"""Offline data: datasets, Gram summaries, the empirical price policy, bias.

The offline log is N tuples (x_n, y_n, p_n, D_n) generated under a possibly
different parameter theta'. Its Gram matrix over the stacked features
[x; y p] drives every offline-aware policy; with scalar elasticity the
regression A_hat of y*p on x defines the empirical price policy
phat(x, y) = A_hat'x / y.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .estimation import eig_extremes
from .model import Context, DemandParams, ProblemSpec, optimal_price

__all__ = [
    "OfflineDataset",
    "OfflineSummary",
    "InfeasibleBiasError",
    "build_summary",
    "demand_moment",
    "phat",
    "phat_batch",
    "estimate_delta_sq",
    "make_biased_params",
    "generate_offline",
    "save_csv",
    "load_csv",
]

# Relative eigenvalue floor below which the x-block counts as singular and
# A_hat is left unavailable.
_SINGULAR_RTOL = 1e-12


class InfeasibleBiasError(ValueError):
    """No admissible parameter exists at the requested bias distance."""


@dataclass(frozen=True)
class OfflineDataset:
    """Offline log in column form: xs (N, d1), ys (N, d2), prices, demands (N,)."""

    xs: np.ndarray
    ys: np.ndarray
    prices: np.ndarray
    demands: np.ndarray

    def __post_init__(self):
        n = self.xs.shape[0]
        if not (self.ys.shape[0] == self.prices.shape[0] == self.demands.shape[0] == n):
            raise ValueError("offline columns disagree on N")
        if n < 1:
            raise ValueError("offline dataset must hold at least one row")
        if not np.all(np.isfinite(self.prices)):
            raise ValueError("offline prices must be finite")

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def d1(self) -> int:
        return self.xs.shape[1]

    @property
    def d2(self) -> int:
        return self.ys.shape[1]

    def features(self) -> np.ndarray:
        """The stacked regression features [x; y p], shape (N, d1 + d2)."""
        return np.hstack([self.xs, self.ys * self.prices[:, None]])


@dataclass(frozen=True)
class OfflineSummary:
    """Derived statistics: block Gram, price regression, eigenvalue extremes."""

    sigma_hat: np.ndarray           # (d1+d2, d1+d2) offline Gram
    a_hat: Optional[np.ndarray]     # (d1,) regression of y*p on x; d2 = 1 only
    lam_min: float                  # smallest eigenvalue of sigma_hat
    lam_max: float                  # largest eigenvalue of sigma_hat
    dispersion_c: float             # lam_min(sigma_hat_xx) / N
    d1: int
    d2: int
    n: int


def build_summary(data: OfflineDataset) -> OfflineSummary:
    """Gram, eigenvalue extremes, and (for d2 = 1) the price regression A_hat."""
    f = data.features()
    sigma = f.T @ f
    lam_min, lam_max = eig_extremes(sigma)
    d1 = data.d1
    sxx = sigma[:d1, :d1]
    xx_min, xx_max = eig_extremes(sxx)
    dispersion = max(xx_min, 0.0) / data.n
    a_hat = None
    if data.d2 == 1:
        if xx_min > _SINGULAR_RTOL * max(xx_max, 1.0):
            a_hat = np.linalg.solve(sxx, sigma[:d1, d1])
    return OfflineSummary(sigma_hat=sigma, a_hat=a_hat,
                          lam_min=max(lam_min, 0.0), lam_max=lam_max,
                          dispersion_c=dispersion, d1=d1, d2=data.d2, n=data.n)


def demand_moment(data: OfflineDataset) -> np.ndarray:
    """sum_n [x_n; y_n p_n] * D_n, the moment the combined estimator needs."""
    return data.features().T @ data.demands


def phat(summary: OfflineSummary, ctx: Context) -> float:
    """The offline empirical price policy A_hat'x / y (scalar elasticity only).

    Deliberately unprojected; the greedy branch projects to [l, u] at
    charge time.
    """
    if summary.d2 != 1:
        raise ValueError("phat requires scalar elasticity (d2 = 1), got d2 = %d" % summary.d2)
    if summary.a_hat is None:
        raise ValueError("phat unavailable: offline x-Gram is singular")
    return float(summary.a_hat @ ctx.x / ctx.y[0])


def phat_batch(summary: OfflineSummary, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized phat over rows of (xs, ys)."""
    if summary.d2 != 1:
        raise ValueError("phat requires scalar elasticity (d2 = 1), got d2 = %d" % summary.d2)
    if summary.a_hat is None:
        raise ValueError("phat unavailable: offline x-Gram is singular")
    return (xs @ summary.a_hat) / ys[:, 0]


def estimate_delta_sq(summary: OfflineSummary, theta_star: DemandParams,
                      sampler, spec: ProblemSpec, m: int,
                      rng: np.random.Generator) -> Tuple[float, float]:
    """Monte Carlo estimate of E[(phat - p*)^2] with its standard error.

    This is an analysis quantity: it needs theta_star and the context law,
    which no policy ever sees.
    """
    if m < 1:
        raise ValueError("need at least one Monte Carlo sample")
    xs, ys = sampler.draw_batch(rng, m)
    ph = phat_batch(summary, xs, ys)
    by = ys @ theta_star.beta
    if np.any(by >= 0):
        raise ValueError("degenerate elasticity in sampled contexts")
    p_star = np.clip(-(xs @ theta_star.alpha) / (2.0 * by), spec.l, spec.u)
    sq = (ph - p_star) ** 2
    mean = float(np.mean(sq))
    se = float(np.std(sq, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return mean, se


def make_biased_params(theta_star: DemandParams, v_true: float,
                       direction: np.ndarray, space: ProblemSpec) -> DemandParams:
    """A parameter at exact distance v_true from theta_star, inside the bounds.

    Tries the given direction, then its reflection, then the inward radial
    direction; whichever first keeps both norm bounds wins. The returned
    parameter is exactly v_true away in Euclidean norm.
    """
    if v_true < 0:
        raise ValueError("v_true must be nonnegative")
    base = theta_star.as_vector()
    if v_true == 0.0:
        return DemandParams.from_vector(base.copy(), theta_star.d1)
    direction = np.asarray(direction, dtype=float)
    nrm = np.linalg.norm(direction)
    if not nrm > 0:
        raise ValueError("direction must be nonzero")
    unit = direction / nrm
    candidates = [unit, -unit]
    base_norm = np.linalg.norm(base)
    if base_norm > 0:
        candidates.append(-base / base_norm)
    d1 = theta_star.d1
    for cand in candidates:
        vec = base + v_true * cand
        if (np.linalg.norm(vec[:d1]) <= space.alpha_max
                and np.linalg.norm(vec[d1:]) <= space.beta_max):
            return DemandParams.from_vector(vec, d1)
    raise InfeasibleBiasError(
        "no admissible parameter at distance %g from theta_star" % v_true)


def generate_offline(theta_prime: DemandParams, spec: ProblemSpec, n: int,
                     price_scheme: str, sampler, rng: np.random.Generator,
                     fixed_price: Optional[float] = None) -> OfflineDataset:
    """Draw N offline rows under theta_prime.

    price_scheme:
      "uniform"   prices i.i.d. uniform on [l, u] (high dispersion)
      "fixed"     one repeated price (fixed_price, default the midpoint)
      "two_point" prices i.i.d. uniform on {l, u}
    """
    if n < 1:
        raise ValueError("need at least one offline row")
    xs, ys = sampler.draw_batch(rng, n)
    if price_scheme == "uniform":
        prices = rng.uniform(spec.l, spec.u, size=n)
    elif price_scheme == "fixed":
        p0 = 0.5 * (spec.l + spec.u) if fixed_price is None else float(fixed_price)
        prices = np.full(n, p0)
    elif price_scheme == "two_point":
        prices = np.where(rng.integers(0, 2, size=n) == 1, spec.u, spec.l)
    else:
        raise ValueError("unknown price scheme %r" % (price_scheme,))
    mean = xs @ theta_prime.alpha + (ys @ theta_prime.beta) * prices
    noise = rng.normal(0.0, spec.noise_R, size=n) if spec.noise_R > 0 else np.zeros(n)
    return OfflineDataset(xs=xs, ys=ys, prices=prices, demands=mean + noise)


def save_csv(data: OfflineDataset, path) -> None:
    """Write the log with header x1..xd1,y1..yd2,p,D at 17 significant digits."""
    header = (["x%d" % (i + 1) for i in range(data.d1)]
              + ["y%d" % (i + 1) for i in range(data.d2)] + ["p", "D"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.n):
            row = ([*data.xs[i], *data.ys[i], data.prices[i], data.demands[i]])
            w.writerow(["%.17g" % v for v in row])


def load_csv(path) -> OfflineDataset:
    """Read a log written by save_csv."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [list(map(float, row)) for row in r]
    d1 = sum(1 for h in header if h.startswith("x"))
    d2 = sum(1 for h in header if h.startswith("y"))
    arr = np.asarray(rows, dtype=float)
    return OfflineDataset(xs=arr[:, :d1], ys=arr[:, d1:d1 + d2],
                          prices=arr[:, d1 + d2], demands=arr[:, d1 + d2 + 1])
