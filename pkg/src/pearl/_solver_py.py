"""Pure-numpy weight solver: Euclidean simplex projection plus projected
gradient descent with Armijo backtracking for the three surrogate losses.

`pearl._solver_cy` implements the same two entry points in C; the active
backend is chosen in `pearl._solver`. Loss codes: 0 squared error (needs a
target vector y), 1 cross-entropy on per-candidate true-class probability
columns, 2 hinge on label-premultiplied margin columns (y unused for 1, 2).
"""

from __future__ import annotations

import numpy as np

PROB_EPS = 1e-12
STEP_FLOOR = 1e-20

# Objective decreases below PROGRESS_EPS * (1 + |f|) are indistinguishable
# from float64 rounding; PROGRESS_PATIENCE such steps in a row mean the
# line search has hit the numerical floor and cannot certify further descent.
PROGRESS_EPS = 1e-16
PROGRESS_PATIENCE = 10

FLAG_OK = 0
FLAG_MAX_ITER = 1
FLAG_STALLED = 2


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} by sorted thresholding."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, v.shape[0] + 1, dtype=np.float64)
    rho = np.nonzero(u - (css - 1.0) / ks > 0.0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def objective(kind: int, P: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    t = P @ w
    n = P.shape[0]
    if kind == 0:
        r = t - y
        return float(r @ r) / n
    if kind == 1:
        p = np.clip(t, PROB_EPS, 1.0)
        return float(-np.sum(np.log(p))) / n
    if kind == 2:
        s = 1.0 - t
        return float(np.sum(s[s > 0.0])) / n
    raise ValueError(f"unknown loss code {kind}")


def _objective_gradient(kind, P, y, w):
    t = P @ w
    n = P.shape[0]
    if kind == 0:
        r = t - y
        f = float(r @ r) / n
        g = (2.0 / n) * (P.T @ r)
    elif kind == 1:
        p = np.clip(t, PROB_EPS, 1.0)
        f = float(-np.sum(np.log(p))) / n
        coef = np.where(t > PROB_EPS, -1.0 / (n * p), 0.0)
        g = P.T @ coef
    elif kind == 2:
        s = 1.0 - t
        active = s > 0.0
        f = float(np.sum(s[active])) / n
        coef = np.where(active, -1.0 / n, 0.0)
        g = P.T @ coef
    else:
        raise ValueError(f"unknown loss code {kind}")
    return f, g


def solve(kind, P, y, w0=None, max_iter=10000, tol=1e-9, armijo_c=1e-4, shrink=0.5):
    """Minimize the surrogate over the simplex from w0 (uniform by default).

    Returns (w, objective, iterations, kkt_residual, flag); kkt_residual is
    the infinity norm of the unit-step projected-gradient mapping at exit.
    """
    P = np.ascontiguousarray(P, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, J = P.shape
    if J == 1:
        w = np.ones(1)
        return w, objective(kind, P, y, w), 0, 0.0, FLAG_OK
    w = np.full(J, 1.0 / J) if w0 is None else project_to_simplex(np.asarray(w0, dtype=np.float64))
    f, g = _objective_gradient(kind, P, y, w)
    stalled = False
    no_progress = 0
    iters = 0
    while iters < max_iter:
        wbar = project_to_simplex(w - g)
        kkt = float(np.max(np.abs(w - wbar)))
        if kkt < tol:
            return w, f, iters, kkt, FLAG_OK
        step = 1.0
        w_new = wbar
        while True:
            d = w_new - w
            gd = float(g @ d)
            f_new = objective(kind, P, y, w_new)
            if f_new <= f + armijo_c * gd:
                break
            step *= shrink
            if step < STEP_FLOOR:
                # No acceptable step along the (sub)gradient direction.
                stalled = True
                break
            w_new = project_to_simplex(w - step * g)
        if stalled:
            break
        decrease = f - f_new
        w = w_new
        f, g = _objective_gradient(kind, P, y, w)
        iters += 1
        if decrease <= PROGRESS_EPS * (1.0 + abs(f)):
            no_progress += 1
            if no_progress >= PROGRESS_PATIENCE:
                stalled = True
                break
        else:
            no_progress = 0
    kkt = float(np.max(np.abs(w - project_to_simplex(w - g))))
    if kkt < tol:
        flag = FLAG_OK
    elif stalled:
        flag = FLAG_STALLED
    else:
        flag = FLAG_MAX_ITER
    return w, f, iters, kkt, flag
