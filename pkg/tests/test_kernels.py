"""Both kernel lanes compute the same optimistic argmax."""
import numpy as np
import pytest

from pricing_lab import _kernels_py, kernels


def random_problem(rng, d=3, g=64, e=3):
    cols = rng.normal(size=(d, g))
    centers = rng.normal(size=(e, d))
    chols = np.empty((e, d, d))
    is_ball = np.zeros(e, dtype=np.uint8)
    for i in range(e):
        if rng.uniform() < 0.5:
            is_ball[i] = 1
            chols[i] = np.eye(d)
        else:
            m = rng.normal(size=(d, d))
            chols[i] = np.linalg.cholesky(m @ m.T + 0.5 * np.eye(d))
    radii = rng.uniform(0.1, 2.0, e)
    return cols, centers, chols, radii, is_ball


def reference_value(cols, centers, chols, radii, is_ball, j):
    """Scalar recomputation of the optimistic value for one column."""
    c = cols[:, j]
    vals = []
    for e in range(centers.shape[0]):
        if is_ball[e]:
            slack = float(np.linalg.norm(c))
        else:
            z = np.linalg.solve(chols[e], c)
            slack = float(np.linalg.norm(z))
        vals.append(float(centers[e] @ c) + radii[e] * slack)
    return min(vals)


def test_lanes_agree(rng):
    for _ in range(50):
        prob = random_problem(rng)
        ia, va = kernels.ucb_argmax(*prob)
        ib, vb = _kernels_py.ucb_argmax(*(np.ascontiguousarray(a) for a in prob))
        assert ia == ib
        assert va == pytest.approx(vb, abs=1e-12, rel=1e-12)


def test_kernel_matches_scalar_reference(rng):
    prob = random_problem(rng, d=4, g=32, e=2)
    idx, val = kernels.ucb_argmax(*prob)
    cols = prob[0]
    by_hand = [reference_value(*prob, j) for j in range(cols.shape[1])]
    assert idx == int(np.argmax(by_hand))
    assert val == pytest.approx(max(by_hand), rel=1e-12)


def test_first_argmax_wins_on_ties():
    cols = np.zeros((2, 5))
    centers = np.zeros((1, 2))
    chols = np.eye(2)[None]
    radii = np.array([1.0])
    is_ball = np.array([1], dtype=np.uint8)
    idx, val = kernels.ucb_argmax(cols, centers, chols, radii, is_ball)
    assert (idx, val) == (0, 0.0)
    idx_py, val_py = _kernels_py.ucb_argmax(cols, centers, chols, radii, is_ball)
    assert (idx_py, val_py) == (0, 0.0)


def test_price_columns_layout():
    prices = np.array([0.5, 2.0])
    x = np.array([1.0, 3.0])
    y = np.array([2.0])
    cols = kernels.price_columns(prices, x, y)
    np.testing.assert_allclose(cols, [[0.5, 2.0], [1.5, 6.0], [0.5, 8.0]])


def test_price_argmax_consistent_between_lanes(rng):
    for _ in range(20):
        prices = np.linspace(0.4, 3.0, 97)
        x = rng.uniform(0.5, 2.0, 2)
        y = rng.uniform(0.5, 1.5, 1)
        _, centers, chols, radii, is_ball = random_problem(rng, d=3, e=2)
        ia, va = kernels.ucb_price_argmax(prices, x, y, centers, chols, radii, is_ball)
        cols = kernels.price_columns(prices, x, y)
        ib, vb = _kernels_py.ucb_argmax(cols, centers, chols, radii, is_ball)
        assert ia == ib
        assert va == pytest.approx(vb, abs=1e-12, rel=1e-12)


def test_backend_flag_is_reported():
    assert kernels.BACKEND in ("compiled", "numpy")


def test_kernel_is_deterministic(rng):
    prob = random_problem(rng)
    a = kernels.ucb_argmax(*prob)
    b = kernels.ucb_argmax(*prob)
    assert a[0] == b[0] and a[1] == b[1]
