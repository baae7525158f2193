"""Cross-validation weight tuning: out-of-fold candidate predictions, the
simplex-constrained surrogate-loss minimizer, the naive full-sample variant,
and the end-to-end fitted model.

The candidate pool is scored by refitting each downstream predictor per fold
(representations are computed once up front and never refit), assembling the
out-of-fold prediction table, and minimizing the mean surrogate loss of the
weighted prediction over the probability simplex. The solver starts at the
uniform vector and descends monotonically, so the returned objective never
exceeds the uniform-average objective, and a vertex-restart safeguard keeps
it within 1e-8 of every single-candidate objective as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _solver
from .candidates import CandidatePool, enumerate_frl_subsets, realize_all
from .core import (
    CLASSIFICATION,
    CROSS_ENTROPY,
    HINGE,
    PROB_EPS,
    REGRESSION,
    SQUARED_ERROR,
    LabeledDataset,
    PredictionBlock,
    seeded_rng,
)
from .downstream import DownstreamConfig, FittedPredictor, fit_downstream, margins_from_probs
from .frl import FittedFrl

WEIGHT_FLOOR = 1e-12

_LOSS_CODES = {SQUARED_ERROR: 0, CROSS_ENTROPY: 1, HINGE: 2}

SOLVER_BACKEND = _solver.BACKEND


# ---------------------------------------------------------------------------
# Fold plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    k: int
    assignment: np.ndarray  # (n,) fold id per row
    seed: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1 or a.shape[0] < self.k:
            raise ValueError("bad fold assignment")
        counts = np.bincount(a, minlength=self.k)
        if len(counts) != self.k or counts.min() < 1:
            raise ValueError("every fold must be nonempty")
        if counts.max() - counts.min() > 1:
            raise ValueError("fold sizes must differ by at most 1")
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]


def make_cv_plan(n: int, k: int, seed: int) -> CvPlan:
    """Seeded uniform permutation chopped into K near-equal contiguous folds."""
    if not 2 <= k <= n:
        raise ValueError(f"K={k} out of range [2, {n}]")
    perm = seeded_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    base, extra = divmod(n, k)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        assignment[perm[start:start + size]] = fold
        start += size
    return CvPlan(k=k, assignment=assignment, seed=int(seed))


# ---------------------------------------------------------------------------
# Out-of-fold prediction tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvPredictionTable:
    """Per-candidate prediction blocks over all n rows plus the truth column.

    Row i of block j comes from a predictor fitted without row i's fold
    (or from the full-sample fit when plan is None, the naive variant).
    """

    blocks: tuple[PredictionBlock, ...]
    truth: np.ndarray
    task: str
    plan: CvPlan | None = None
    class_count: int | None = None

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("table needs at least one candidate block")
        n = self.blocks[0].n
        for b in self.blocks:
            if b.task != self.task or b.n != n:
                raise ValueError("all blocks must share task kind and row count")
        if np.asarray(self.truth).shape[0] != n:
            raise ValueError("truth length mismatch")

    @property
    def size(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> int:
        return self.blocks[0].n


def cv_predictions(
    dataset: LabeledDataset,
    pool: CandidatePool,
    foundation: Sequence[np.ndarray],
    plan: CvPlan,
    config: DownstreamConfig,
) -> CvPredictionTable:
    """Algorithm: per candidate and fold, refit the downstream predictor on
    the out-of-fold rows of the realized candidate matrix and predict the
    held-out rows. Fit errors propagate annotated with (candidate, fold)."""
    if plan.n != dataset.n:
        raise ValueError("fold plan length does not match the dataset")
    realized = realize_all(pool, foundation)
    q = 1 if dataset.task == REGRESSION else dataset.class_count
    values = [np.empty((dataset.n, q)) for _ in range(pool.size)]
    for j in range(pool.size):
        Zj = realized[j]
        for k in range(plan.k):
            held = plan.assignment == k
            try:
                fit = fit_downstream(
                    Zj[~held], dataset.target[~held], dataset.task, config
                )
                values[j][held] = fit.predict(Zj[held]).values
            except Exception as exc:
                raise RuntimeError(f"candidate {j}, fold {k}: {exc}") from exc
    blocks = tuple(PredictionBlock(v, dataset.task) for v in values)
    return CvPredictionTable(
        blocks=blocks,
        truth=dataset.target,
        task=dataset.task,
        plan=plan,
        class_count=dataset.class_count,
    )


def full_sample_predictions(
    dataset: LabeledDataset,
    pool: CandidatePool,
    foundation: Sequence[np.ndarray],
    config: DownstreamConfig,
) -> tuple[CvPredictionTable, tuple[FittedPredictor, ...]]:
    """In-sample prediction table from full-data fits (no cross-validation)."""
    realized = realize_all(pool, foundation)
    predictors = []
    blocks = []
    for j, Zj in enumerate(realized):
        try:
            fit = fit_downstream(Zj, dataset.target, dataset.task, config)
        except Exception as exc:
            raise RuntimeError(f"candidate {j}: {exc}") from exc
        predictors.append(fit)
        blocks.append(fit.predict(Zj))
    table = CvPredictionTable(
        blocks=tuple(blocks),
        truth=dataset.target,
        task=dataset.task,
        plan=None,
        class_count=dataset.class_count,
    )
    return table, tuple(predictors)


# ---------------------------------------------------------------------------
# Simplex solver driver
# ---------------------------------------------------------------------------


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}; O(J log J) sort-based."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError("expected a nonempty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("projection input must be finite")
    return _solver.project_to_simplex(v)


def _solver_inputs(table: CvPredictionTable, loss: str):
    """Reduce the table to the (n, J) column matrix the solver consumes."""
    if loss not in _LOSS_CODES:
        raise ValueError(f"unknown surrogate loss {loss!r}")
    n, J = table.n, table.size
    P = np.empty((n, J))
    if loss == SQUARED_ERROR:
        if table.task != REGRESSION:
            raise ValueError("squared-error weighting needs regression blocks")
        for j, b in enumerate(table.blocks):
            P[:, j] = b.values[:, 0]
        y = np.asarray(table.truth, dtype=np.float64)
    elif loss == CROSS_ENTROPY:
        if table.task != CLASSIFICATION:
            raise ValueError("cross-entropy weighting needs classification blocks")
        labels = np.asarray(table.truth, dtype=np.int64)
        rows = np.arange(n)
        for j, b in enumerate(table.blocks):
            P[:, j] = b.values[rows, labels]
        y = np.zeros(n)
    else:
        if table.task != CLASSIFICATION or table.class_count != 2:
            raise ValueError("hinge weighting needs binary classification blocks")
        pm = 2.0 * np.asarray(table.truth, dtype=np.float64) - 1.0
        for j, b in enumerate(table.blocks):
            P[:, j] = pm * margins_from_probs(b.values)
        y = np.zeros(n)
    for j in range(J):
        if not np.all(np.isfinite(P[:, j])):
            raise ValueError(f"candidate {j} produced non-finite surrogate inputs")
    return _LOSS_CODES[loss], P, y


def objective_at(table: CvPredictionTable, loss: str, w) -> float:
    """Mean surrogate loss of the w-weighted table predictions."""
    kind, P, y = _solver_inputs(table, loss)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (table.size,):
        raise ValueError("weight length does not match the table")
    return float(_solver.objective(kind, P, y, w))


def vertex_objectives(table: CvPredictionTable, loss: str) -> np.ndarray:
    """Surrogate objective of each single-candidate vertex e_j."""
    kind, P, y = _solver_inputs(table, loss)
    return _vertex_objectives(kind, P, y)


def _vertex_objectives(kind: int, P: np.ndarray, y: np.ndarray) -> np.ndarray:
    if kind == 0:
        return np.mean((P - y[:, None]) ** 2, axis=0)
    if kind == 1:
        return -np.mean(np.log(np.clip(P, PROB_EPS, 1.0)), axis=0)
    return np.mean(np.maximum(0.0, 1.0 - P), axis=0)


@dataclass(frozen=True)
class SolveResult:
    weights: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    warnings: tuple
    vertex_objectives: np.ndarray

    def report(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "weights": [float(x) for x in self.weights],
            "warnings": list(self.warnings),
        }


_FLAG_WARNINGS = {
    _solver.FLAG_MAX_ITER: "max_iter_reached",
    _solver.FLAG_STALLED: "line_search_stalled",
}


def _clean_weights(w: np.ndarray) -> np.ndarray:
    w = np.where(w < WEIGHT_FLOOR, 0.0, w)
    total = float(w.sum())
    if total <= 0:
        raise ValueError("all weights vanished during cleanup")
    return w / total


def validate_weights(w: np.ndarray) -> np.ndarray:
    """Clamp [-1e-12, 0) dust to zero; reject anything further negative or a
    sum off 1 by more than 1e-9."""
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < -WEIGHT_FLOOR):
        raise ValueError("weights must be nonnegative")
    w = np.maximum(w, 0.0)
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1 within 1e-9")
    return w


def solve_weights(
    table: CvPredictionTable,
    loss: str,
    max_iter: int = 10000,
    tol: float = 1e-9,
) -> SolveResult:
    """Minimize the mean surrogate loss of the weighted predictions over the
    simplex by projected gradient descent with Armijo backtracking, starting
    from the uniform vector with exact Euclidean projection each step.

    If any single-candidate vertex still beats the iterate (possible only at
    hinge kinks), the descent restarts once from the best vertex, so the
    returned objective is within 1e-8 of every vertex and of the uniform
    average. Weight entries below 1e-12 are zeroed and renormalized.
    """
    kind, P, y = _solver_inputs(table, loss)
    w, f, iters, kkt, flag = _solver.solve(kind, P, y, None, max_iter, tol)
    warnings = ()
    if flag in _FLAG_WARNINGS:
        warnings += (_FLAG_WARNINGS[flag],)
    fv = _vertex_objectives(kind, P, y)
    jstar = int(np.argmin(fv))
    if fv[jstar] < f:
        e = np.zeros(table.size)
        e[jstar] = 1.0
        w2, f2, iters2, kkt2, flag2 = _solver.solve(kind, P, y, e, max_iter, tol)
        iters += iters2
        if f2 < f:
            w, f, kkt, flag = w2, f2, kkt2, flag2
            if flag2 in _FLAG_WARNINGS:
                warnings += ("vertex_restart:" + _FLAG_WARNINGS[flag2],)
            else:
                warnings += ("vertex_restart",)
    w = _clean_weights(np.asarray(w))
    f = float(_solver.objective(kind, P, y, w))
    return SolveResult(
        weights=w,
        objective=f,
        iterations=int(iters),
        kkt_residual=float(kkt),
        warnings=warnings,
        vertex_objectives=fv,
    )


def solve_weights_naive(
    dataset: LabeledDataset,
    pool: CandidatePool,
    foundation: Sequence[np.ndarray],
    config: DownstreamConfig,
    loss: str,
    max_iter: int = 10000,
    tol: float = 1e-9,
) -> SolveResult:
    """Weights tuned against in-sample predictions from full-data fits; kept
    for overfitting comparisons against the cross-validated criterion."""
    table, _ = full_sample_predictions(dataset, pool, foundation, config)
    return solve_weights(table, loss, max_iter=max_iter, tol=tol)


# ---------------------------------------------------------------------------
# End-to-end model
# ---------------------------------------------------------------------------


@dataclass
class PearlModel:
    """Fitted aggregate: learners, candidate pool, per-candidate predictors
    fitted on all rows, and the tuned weight vector."""

    task: str
    frls: tuple[FittedFrl, ...]
    pool: CandidatePool
    predictors: tuple[FittedPredictor, ...]
    weights: np.ndarray
    solve_result: SolveResult
    cv_table: CvPredictionTable
    loss: str
    downstream: DownstreamConfig
    class_count: int | None = None

    def __post_init__(self):
        # Last (X, blocks) pair; keyed by object identity so baselines and
        # the weighted predictor share one transform of the same test rows.
        self._block_cache: tuple | None = None

    def foundation(self, X: np.ndarray) -> list[np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        return [f.transform(X) for f in self.frls]

    def candidate_blocks(self, X: np.ndarray) -> list[PredictionBlock]:
        from .candidates import realize

        cached = self._block_cache
        if cached is not None and cached[0] is X:
            return cached[1]
        foundation = self.foundation(X)
        blocks = [
            self.predictors[j].predict(realize(self.pool, foundation, j))
            for j in range(self.pool.size)
        ]
        self._block_cache = (X, blocks)
        return blocks

    def predict(self, X: np.ndarray, weights=None) -> PredictionBlock:
        """Weighted average of the candidate predictions (probability rows
        are averaged for classification)."""
        w = self.weights if weights is None else validate_weights(weights)
        if w.shape[0] != self.pool.size:
            raise ValueError("weight length does not match the candidate pool")
        blocks = self.candidate_blocks(X)
        return aggregate_blocks(blocks, w, self.task)


def aggregate_blocks(blocks: Sequence[PredictionBlock], w: np.ndarray, task: str) -> PredictionBlock:
    out = np.zeros_like(blocks[0].values)
    for wj, block in zip(w, blocks):
        out += wj * block.values
    return PredictionBlock(out, task)


def default_loss_for(task: str) -> str:
    return SQUARED_ERROR if task == REGRESSION else CROSS_ENTROPY


def pearl_fit(
    train: LabeledDataset,
    frls: Sequence[FittedFrl],
    pool: CandidatePool | None = None,
    plan: CvPlan | None = None,
    k_folds: int = 5,
    cv_seed: int = 0,
    downstream: DownstreamConfig | None = None,
    loss: str | None = None,
    solver_max_iter: int = 10000,
    solver_tol: float = 1e-9,
) -> PearlModel:
    """Fit the full aggregate on a labeled dataset given fitted learners."""
    frls = tuple(frls)
    if not frls:
        raise ValueError("need at least one fitted learner")
    downstream = downstream or DownstreamConfig(
        model="ridge" if train.task == REGRESSION else "softmax"
    )
    loss = loss or default_loss_for(train.task)
    foundation = [f.transform(train.features) for f in frls]
    if pool is None:
        pool = enumerate_frl_subsets([f.output_dim for f in frls])
    if plan is None:
        plan = make_cv_plan(train.n, k_folds, cv_seed)
    table = cv_predictions(train, pool, foundation, plan, downstream)
    result = solve_weights(table, loss, max_iter=solver_max_iter, tol=solver_tol)
    _, predictors = full_sample_predictions(train, pool, foundation, downstream)
    return PearlModel(
        task=train.task,
        frls=frls,
        pool=pool,
        predictors=predictors,
        weights=result.weights,
        solve_result=result,
        cv_table=table,
        loss=loss,
        downstream=downstream,
        class_count=train.class_count,
    )


def pearl_fit_predict(
    train: LabeledDataset,
    test_features: np.ndarray,
    frls: Sequence[FittedFrl],
    **kwargs,
) -> tuple[PearlModel, PredictionBlock]:
    """Fit on the labeled data and predict the test rows in one call."""
    model = pearl_fit(train, frls, **kwargs)
    return model, model.predict(test_features)
