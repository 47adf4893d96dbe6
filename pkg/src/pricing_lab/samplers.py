"""Context distributions used by the simulator.

Coordinates are independent uniforms, scaled by 1/sqrt(dim) so the feature
norm bounds stay O(1) as dimensions grow. With d2 = 1 the elasticity
feature is an unscaled scalar uniform, bounded away from zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .model import Context


@dataclass(frozen=True)
class ContextSampler:
    """Product-uniform context source with explicit support bounds.

    x coordinates ~ U[x_range] / sqrt(d1). For d2 = 1, y ~ U[y_range]
    unscaled (default [0.8, 1.2]); for d2 > 1, y coordinates
    ~ U[y_range] / sqrt(d2) (default [0.5, 1.5]).
    """

    d1: int
    d2: int
    x_range: Tuple[float, float] = (0.5, 1.5)
    y_range: Tuple[float, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.y_range is None:
            rng = (0.8, 1.2) if self.d2 == 1 else (0.5, 1.5)
            object.__setattr__(self, "y_range", rng)
        if not (0 < self.x_range[0] <= self.x_range[1]):
            raise ValueError("x_range must be positive and ordered")
        if not (0 < self.y_range[0] <= self.y_range[1]):
            raise ValueError("y_range must be positive and ordered")

    # -- support bounds ----------------------------------------------------

    @property
    def x_coord_range(self) -> Tuple[float, float]:
        s = np.sqrt(self.d1)
        return (self.x_range[0] / s, self.x_range[1] / s)

    @property
    def y_coord_range(self) -> Tuple[float, float]:
        if self.d2 == 1:
            return (self.y_range[0], self.y_range[1])
        s = np.sqrt(self.d2)
        return (self.y_range[0] / s, self.y_range[1] / s)

    @property
    def x_max(self) -> float:
        """Upper bound on ||x||."""
        return float(self.x_range[1])

    @property
    def y_max(self) -> float:
        """Upper bound on ||y||."""
        return float(self.y_range[1])

    @property
    def y_min(self) -> float:
        """Lower bound on ||y||."""
        return float(self.y_range[0])

    @property
    def lambda_min_exx(self) -> float:
        """Exact smallest eigenvalue of E[xx'] for the product-uniform law.

        E[xx'] = var I + mean^2 11', whose spectrum is {var (multiplicity
        d1 - 1), var + d1 mean^2}; for d1 = 1 the single eigenvalue is
        var + mean^2 = E[x^2].
        """
        lo, hi = self.x_coord_range
        var = (hi - lo) ** 2 / 12.0
        mean = (hi + lo) / 2.0
        if self.d1 == 1:
            return var + mean ** 2
        return var

    # -- sampling ----------------------------------------------------------

    def draw_batch(self, rng: np.random.Generator, n: int):
        """Draw n contexts; returns (xs, ys) with shapes (n, d1), (n, d2)."""
        xlo, xhi = self.x_coord_range
        ylo, yhi = self.y_coord_range
        xs = rng.uniform(xlo, xhi, size=(n, self.d1))
        ys = rng.uniform(ylo, yhi, size=(n, self.d2))
        return xs, ys

    def draw_one(self, rng: np.random.Generator) -> Context:
        xs, ys = self.draw_batch(rng, 1)
        return Context(x=xs[0], y=ys[0])
