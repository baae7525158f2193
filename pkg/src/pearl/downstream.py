"""Per-candidate downstream predictors: ridge regression solved by normal
equations on centered data, and multinomial logistic regression fit by
full-batch gradient descent with Armijo backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import CLASSIFICATION, PROB_EPS, REGRESSION, PredictionBlock

MARGIN_CLIP = 30.0


@dataclass(frozen=True)
class DownstreamConfig:
    model: str = "ridge"  # ridge | softmax
    ridge_lambda: float = 1e-6
    softmax_l2: float = 1e-4
    max_iter: int = 5000
    tol: float = 1e-6

    def __post_init__(self):
        if self.model not in ("ridge", "softmax"):
            raise ValueError(f"unknown downstream model {self.model!r}")
        if self.ridge_lambda < 0 or self.softmax_l2 < 0:
            raise ValueError("regularization strengths must be >= 0")


@dataclass
class FittedPredictor:
    kind: str  # ridge | softmax
    input_dim: int
    coef: np.ndarray | None = None  # ridge (p,)
    intercept: float = 0.0
    weights: np.ndarray | None = None  # softmax (p+1, C), row 0 = intercepts
    class_count: int | None = None
    iterations: int = 0
    grad_norm: float = 0.0
    warnings: tuple = ()

    def predict(self, Z: np.ndarray) -> PredictionBlock:
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.input_dim:
            raise ValueError(f"predict: expected (m, {self.input_dim}) inputs, got {Z.shape}")
        if self.kind == "ridge":
            return PredictionBlock(Z @ self.coef + self.intercept, REGRESSION)
        logits = self.weights[0] + Z @ self.weights[1:]
        return PredictionBlock(_softmax(logits), CLASSIFICATION)


def predict(model: FittedPredictor, Z: np.ndarray) -> PredictionBlock:
    return model.predict(Z)


def fit_ridge(Z: np.ndarray, y: np.ndarray, lam: float) -> FittedPredictor:
    """Minimize ||y - (Z b + c)||^2 + lam ||b||^2, intercept unpenalized.

    Solved via Cholesky on the centered normal equations. A singular system
    at lam = 0 retries once with lam = 1e-8 and records a warning.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if Z.ndim != 2 or Z.shape[0] != y.shape[0] or Z.shape[0] < 1:
        raise ValueError("fit_ridge: bad shapes")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    zm = Z.mean(axis=0)
    ym = float(y.mean())
    Zc = Z - zm
    yc = y - ym
    A = Zc.T @ Zc
    b = Zc.T @ yc
    warnings = ()
    try:
        coef = _chol_solve(A, b, lam)
    except np.linalg.LinAlgError:
        if lam > 0:
            raise
        warnings = ("singular_at_lambda_zero: retried with lambda=1e-8",)
        coef = _chol_solve(A, b, 1e-8)
    intercept = ym - float(zm @ coef)
    return FittedPredictor(
        kind="ridge", input_dim=Z.shape[1], coef=coef, intercept=intercept, warnings=warnings
    )


def _chol_solve(A: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    M = A + lam * np.eye(A.shape[0])
    try:
        c, low = scipy.linalg.cho_factor(M)
    except scipy.linalg.LinAlgError:
        raise np.linalg.LinAlgError("normal equations are singular") from None
    coef = scipy.linalg.cho_solve((c, low), b)
    if not np.all(np.isfinite(coef)):
        raise np.linalg.LinAlgError("non-finite ridge solution")
    return coef


def _softmax(logits: np.ndarray) -> np.ndarray:
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_objective_grad(W, X, labels, l2):
    """Mean cross-entropy plus (l2/2)||W without intercept row||^2 and its gradient."""
    n = X.shape[0]
    P = _softmax(X @ W)
    p_true = np.clip(P[np.arange(n), labels], PROB_EPS, 1.0)
    obj = float(-np.mean(np.log(p_true))) + 0.5 * l2 * float(np.sum(W[1:] * W[1:]))
    G = P.copy()
    G[np.arange(n), labels] -= 1.0
    grad = X.T @ G / n
    grad[1:] += l2 * W[1:]
    return obj, grad


def fit_softmax(Z, labels, l2=1e-4, max_iter=5000, tol=1e-6,
                class_count: int | None = None) -> FittedPredictor:
    """Multinomial logistic regression, zero-initialized full-batch descent.

    Armijo backtracking (c = 1e-4, shrink 0.5) keeps the objective
    nonincreasing; stops when the gradient infinity norm drops below tol.
    Every class must appear at least once; non-convergence returns the best
    iterate with a warning.
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if Z.ndim != 2 or Z.shape[0] != labels.shape[0]:
        raise ValueError("fit_softmax: bad shapes")
    C = int(labels.max()) + 1 if class_count is None else int(class_count)
    present = np.unique(labels)
    if C < 2 or len(present) != C or present[0] != 0 or present[-1] != C - 1:
        raise ValueError("every class in {0..C-1} must appear at least once")
    n, p = Z.shape
    X = np.hstack([np.ones((n, 1)), Z])
    W = np.zeros((p + 1, C))
    obj, grad = _softmax_objective_grad(W, X, labels, l2)
    warnings = ()
    it = 0
    gnorm = float(np.max(np.abs(grad)))
    while it < max_iter and gnorm >= tol:
        step = 1.0
        g2 = float(np.sum(grad * grad))
        while True:
            W_new = W - step * grad
            obj_new, grad_new = _softmax_objective_grad(W_new, X, labels, l2)
            if obj_new <= obj - 1e-4 * step * g2:
                break
            step *= 0.5
            if step < 1e-20:
                warnings = ("line_search_stalled",)
                break
        if warnings:
            break
        W, obj, grad = W_new, obj_new, grad_new
        gnorm = float(np.max(np.abs(grad)))
        it += 1
    if gnorm >= tol and not warnings:
        warnings = ("max_iter_reached",)
    return FittedPredictor(
        kind="softmax",
        input_dim=p,
        weights=W,
        class_count=C,
        iterations=it,
        grad_norm=gnorm,
        warnings=warnings,
    )


def fit_downstream(Z, target, task: str, config: DownstreamConfig) -> FittedPredictor:
    """Dispatch to the configured predictor for the task."""
    if config.model == "ridge":
        if task != REGRESSION:
            raise ValueError("ridge downstream requires a regression task")
        return fit_ridge(Z, target, config.ridge_lambda)
    if task != CLASSIFICATION:
        raise ValueError("softmax downstream requires a classification task")
    return fit_softmax(
        Z, target, l2=config.softmax_l2, max_iter=config.max_iter, tol=config.tol
    )


def margins_from_probs(values: np.ndarray) -> np.ndarray:
    """Binary margins from two-class probability rows: logit of the class-1
    probability clipped to [-30, 30]; class 1 maps to the +1 side."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != 2:
        raise ValueError("margins need two-class probability rows")
    p1 = np.clip(values[:, 1], PROB_EPS, 1.0 - PROB_EPS)
    return np.clip(np.log(p1) - np.log1p(-p1), -MARGIN_CLIP, MARGIN_CLIP)
