"""Shared fixtures: small hand-sized problem instances."""
import numpy as np
import pytest

from pricing_lab.model import Context, DemandParams, ProblemSpec
from pricing_lab.samplers import ContextSampler


def tiny_spec(d1=1, d2=1, noise_R=0.1, l_alpha=1.0, u_alpha=3.0,
              l_beta=0.5, u_beta=1.5, alpha_max=4.0, beta_max=2.0,
              x_max=2.0, y_max=1.5, y_min=0.5, lambda_min_Exx=1.0):
    return ProblemSpec(d1=d1, d2=d2, alpha_max=alpha_max, beta_max=beta_max,
                       x_max=x_max, y_max=y_max, y_min=y_min,
                       l_alpha=l_alpha, u_alpha=u_alpha,
                       l_beta=l_beta, u_beta=u_beta,
                       noise_R=noise_R, lambda_min_Exx=lambda_min_Exx)


@pytest.fixture
def spec11():
    """Scalar instance; price interval [1/3, 3]."""
    return tiny_spec()


@pytest.fixture
def theta11():
    return DemandParams(alpha=np.array([2.0]), beta=np.array([-1.0]))


@pytest.fixture
def ctx11():
    return Context(x=np.array([1.0]), y=np.array([1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def draw_interior(rng, spec, sampler=None):
    """Random (theta, ctx) with the unprojected optimum strictly in (l, u)."""
    while True:
        if sampler is None:
            x = rng.uniform(0.5, spec.x_max, spec.d1)
            y = rng.uniform(spec.y_min, spec.y_max, spec.d2)
        else:
            x, y = sampler.draw_one(rng).x, sampler.draw_one(rng).y
        alpha = rng.uniform(0.2, 1.0, spec.d1)
        beta = -rng.uniform(0.2, 1.0, spec.d2)
        a = alpha @ x
        b = beta @ y
        p_star = -a / (2.0 * b)
        if spec.l + 1e-6 < p_star < spec.u - 1e-6:
            return DemandParams(alpha, beta), Context(x, y), p_star


def unit_sampler(d1=1, d2=1):
    return ContextSampler(d1=d1, d2=d2, x_range=(1.0, 1.0), y_range=(1.0, 1.0))
