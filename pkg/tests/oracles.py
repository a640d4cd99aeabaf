"""Independent reference computations used by the test-suite."""

import itertools

import numpy as np

GRID_STEP = 1e-3


def random_instance(rng, max_targets=3, max_potentials=6):
    """Random hinge potentials: coefficients in [-2, 2], constants in [-1, 1],
    weights in (0, 5], exponents in {1, 2}."""
    n = int(rng.integers(1, max_targets + 1))
    m = int(rng.integers(1, max_potentials + 1))
    pots = []
    for _ in range(m):
        k = int(rng.integers(1, n + 1))
        idx = sorted(int(i) for i in rng.choice(n, k, replace=False))
        coefs = [float(rng.uniform(-2, 2)) for _ in idx]
        weight = float(5.0 - rng.uniform(0, 5))  # (0, 5]
        pots.append((list(zip(idx, coefs)), float(rng.uniform(-1, 1)), int(rng.integers(1, 3)), weight))
    return n, pots


def dense(n, pots):
    A = np.zeros((len(pots), n))
    b = np.array([p[1] for p in pots])
    e = np.array([p[2] for p in pots])
    w = np.array([p[3] for p in pots])
    for j, (coefs, *_rest) in enumerate(pots):
        for i, c in coefs:
            A[j, i] += c
    return A, b, e, w


def objective_at(A, b, e, w, Y):
    """Objective at each row of ``Y``."""
    lin = Y @ A.T + b
    h = np.maximum(lin, 0.0)
    return (w * np.where(e == 2, h * h, h)).sum(axis=-1)


def _exact_last(lin0, a, e, w):
    """Exact minimum over t in [0, 1] of sum_j w_j * max(lin0_j + a_j t, 0)^e_j,
    row by row.  Convex and piecewise polynomial in t, so the minimum sits at an
    endpoint, a breakpoint, or a stationary point inside one of the pieces."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = np.where(a != 0, -lin0 / a, 0.0)
    pts = np.sort(np.clip(np.concatenate([np.zeros((len(lin0), 1)), np.ones((len(lin0), 1)), bp], axis=1),
                          0.0, 1.0), axis=1)
    cands = [pts]
    for k in range(pts.shape[1] - 1):
        lo, hi = pts[:, k], pts[:, k + 1]
        mid = (lo + hi) / 2
        active = (lin0 + a * mid[:, None]) > 0
        lin_w = np.where(active & (e == 1), w * a, 0.0).sum(axis=1)
        quad_b = np.where(active & (e == 2), 2 * w * a * lin0, 0.0).sum(axis=1)
        quad_a = np.where(active & (e == 2), 2 * w * a * a, 0.0).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(quad_a > 0, -(lin_w + quad_b) / quad_a, lo)
        cands.append(np.clip(t, lo, hi)[:, None])
    T = np.concatenate(cands, axis=1)  # rows x candidates
    h = np.maximum(lin0[:, None, :] + T[:, :, None] * a, 0.0)
    return (w * np.where(e == 2, h * h, h)).sum(axis=2).min(axis=1)


def grid_min(n, pots, step=GRID_STEP, chunk=50_000):
    """Brute force: grid of spacing ``step`` over the first n-1 coordinates,
    exact minimisation over the last one.  Never above the plain full-grid
    minimum, and within grid resolution of the true minimum."""
    A, b, e, w = dense(n, pots)
    axis = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    if n == 1:
        heads = np.zeros((1, 0))
    else:
        heads = np.array(list(itertools.product(axis, repeat=n - 1)))
    best = np.inf
    for s in range(0, len(heads), chunk):
        H = heads[s:s + chunk]
        lin0 = H @ A[:, :-1].T + b
        best = min(best, float(_exact_last(lin0, A[:, -1], e, w).min()))
    return best


def plain_grid_min(n, pots, step=0.01):
    """Full grid brute force; only for cross-checking :func:`grid_min` on coarse grids."""
    A, b, e, w = dense(n, pots)
    axis = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    Y = np.array(list(itertools.product(axis, repeat=n)))
    return float(objective_at(A, b, e, w, Y).min())
