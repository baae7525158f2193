"""Comparison methods sharing the fitted pipeline state.

best     test-set oracle over the single-learner candidates (needs labels,
         flagged ORACLE in reports so tables cannot be misread)
fusion   the one candidate concatenating every learner
sa_frl   equal weights over the single-learner candidates
sa_cand  equal weights over all candidates
ms       the candidate minimizing the cross-validated surrogate objective
"""

from __future__ import annotations

import numpy as np

from .candidates import FUSION_COLUMNS
from .core import REGRESSION, PredictionBlock, metric_suite
from .weights import PearlModel, vertex_objectives

BASELINES = ("best", "fusion", "sa_frl", "sa_cand", "ms")


def _candidate_block(model: PearlModel, X: np.ndarray, j: int) -> PredictionBlock:
    return model.candidate_blocks(X)[j]


def _original_loss(task: str, truth, block: PredictionBlock) -> float:
    metrics = metric_suite(truth, block)
    if task == REGRESSION:
        return metrics["mse"]
    return 1.0 - metrics["accuracy"]


def _fusion_index(model: PearlModel) -> int:
    dims = model.pool.foundation_dims
    for j, spec in enumerate(model.pool.specs):
        if spec.kind == FUSION_COLUMNS:
            if spec.indices == tuple(range(sum(dims))):
                return j
        elif spec.indices == tuple(range(len(dims))):
            return j
    raise ValueError("pool has no full-fusion candidate")


def run_baseline(
    kind: str,
    model: PearlModel,
    test_features: np.ndarray,
    test_truth=None,
) -> tuple[PredictionBlock, dict]:
    """Evaluate one baseline on the test rows; returns its prediction block
    plus a small report dict."""
    if kind not in BASELINES:
        raise ValueError(f"unknown baseline {kind!r}")
    report: dict = {"method": kind}
    J = model.pool.size

    if kind == "best":
        if test_truth is None:
            raise ValueError("oracle baseline needs labels")
        singles = model.pool.singleton_indices()
        if not singles:
            raise ValueError("pool has no single-learner candidates")
        blocks = [_candidate_block(model, test_features, j) for j in singles]
        losses = [_original_loss(model.task, test_truth, b) for b in blocks]
        pick = int(np.argmin(losses))
        report.update(
            oracle=True,
            selected_candidate=int(singles[pick]),
            test_losses=[float(v) for v in losses],
        )
        return blocks[pick], report

    if kind == "fusion":
        j = _fusion_index(model)
        report.update(selected_candidate=j)
        return _candidate_block(model, test_features, j), report

    if kind == "sa_frl":
        singles = model.pool.singleton_indices()
        if not singles:
            raise ValueError("pool has no single-learner candidates")
        w = np.zeros(J)
        w[list(singles)] = 1.0 / len(singles)
        report.update(weights=[float(x) for x in w])
        return model.predict(test_features, weights=w), report

    if kind == "sa_cand":
        w = np.full(J, 1.0 / J)
        report.update(weights=[float(x) for x in w])
        return model.predict(test_features, weights=w), report

    # ms: vertex with the lowest cross-validated surrogate objective
    fv = vertex_objectives(model.cv_table, model.loss)
    j = int(np.argmin(fv))
    report.update(selected_candidate=j, cv_objective=float(fv[j]))
    return _candidate_block(model, test_features, j), report
