"""Synthetic benchmark: data generation, the (sigma, n, rep) experiment
grid, the oracle-candidate weight-consistency run, and CSV reporting.

The regression targets follow
    y = b0 + b1*x1 + b2*x2 + a1*x1^2 + a2*x2^2 + g*x1*x2 + sin^2(x1) + eps
with x ~ N(0, I_2), eps ~ N(0, sigma^2), and coefficients drawn from
N(0, 0.09). Unlabeled, labeled, and test rows come from disjoint seeded
substreams, and per-rep streams are derived from (base_seed, sigma, n, rep),
so repetitions can run in parallel without changing any output byte.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import BASELINES, run_baseline
from .candidates import CandidatePool, CandidateSpec, EXPLICIT, frl_subset_specs
from .core import REGRESSION, LabeledDataset, UnlabeledDataset, metric_suite, seeded_rng
from .downstream import DownstreamConfig
from .frl import fit_frl, register_frl
from .weights import make_cv_plan, pearl_fit

METHODS = ("pearl",) + BASELINES

_COEFF_TAG = 0xC0EF
_STREAM_NAMES = ("unlabeled", "labeled", "test", "cv")

ORACLE_FRL_NAME = "synthetic-truth-features"


# ---------------------------------------------------------------------------
# Data generating process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    sigma: float
    n_labeled: int
    n_unlabeled: int = 2000
    n_test: int = 1000
    reps: int = 20
    base_seed: int = 1234
    coeff_policy: str = "per_rep"  # per_rep | fixed

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        for name in ("n_labeled", "n_unlabeled", "n_test", "reps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.coeff_policy not in ("per_rep", "fixed"):
            raise ValueError("coeff_policy must be per_rep or fixed")


def true_mean(X: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Conditional mean of the target given the two raw features."""
    b0, b1, b2, a1, a2, g = coeffs
    x1, x2 = X[:, 0], X[:, 1]
    return b0 + b1 * x1 + b2 * x2 + a1 * x1 * x1 + a2 * x2 * x2 + g * x1 * x2 + np.sin(x1) ** 2


def oracle_features(X: np.ndarray) -> np.ndarray:
    """The true feature vector (x1, x2, x1^2, x2^2, x1*x2, sin^2 x1)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("oracle features need 2-column inputs")
    x1, x2 = X[:, 0], X[:, 1]
    return np.column_stack([x1, x2, x1 * x1, x2 * x2, x1 * x2, np.sin(x1) ** 2])


class _OracleTransformer:
    def transform(self, rows: np.ndarray) -> np.ndarray:
        return oracle_features(rows)


register_frl(ORACLE_FRL_NAME, lambda train: _OracleTransformer())


def _sigma_bits(sigma: float) -> int:
    return int(np.float64(sigma).view(np.uint64))


def _rep_streams(config: SyntheticConfig, rep: int) -> dict:
    root = np.random.SeedSequence(
        entropy=[int(config.base_seed), _sigma_bits(config.sigma), int(config.n_labeled), int(rep)]
    )
    streams = dict(zip(_STREAM_NAMES, root.spawn(len(_STREAM_NAMES))))
    if config.coeff_policy == "fixed":
        streams["coeff"] = np.random.SeedSequence(entropy=[int(config.base_seed), _COEFF_TAG])
    else:
        streams["coeff"] = np.random.SeedSequence(
            entropy=[
                int(config.base_seed),
                _COEFF_TAG,
                _sigma_bits(config.sigma),
                int(config.n_labeled),
                int(rep),
            ]
        )
    return streams


def _draw_labeled(seq, count: int, sigma: float, coeffs: np.ndarray) -> LabeledDataset:
    rng = seeded_rng(seq)
    X = rng.standard_normal((count, 2))
    y = true_mean(X, coeffs) + sigma * rng.standard_normal(count)
    return LabeledDataset(features=X, target=y, task=REGRESSION)


def generate_synthetic(config: SyntheticConfig, rep: int, coefficients=None) -> dict:
    """One repetition's datasets plus the coefficients that generated them.

    `coefficients` overrides the seeded draw (used by diagnostic checks).
    Returns {"unlabeled", "labeled", "test", "coefficients", "cv_seed"}.
    """
    streams = _rep_streams(config, rep)
    if coefficients is None:
        coefficients = seeded_rng(streams["coeff"]).normal(0.0, 0.3, size=6)
    else:
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.shape != (6,):
            raise ValueError("need 6 coefficients")
    unlabeled = UnlabeledDataset(
        seeded_rng(streams["unlabeled"]).standard_normal((config.n_unlabeled, 2))
    )
    labeled = _draw_labeled(streams["labeled"], config.n_labeled, config.sigma, coefficients)
    test = _draw_labeled(streams["test"], config.n_test, config.sigma, coefficients)
    cv_seed = int(streams["cv"].generate_state(1)[0])
    return {
        "unlabeled": unlabeled,
        "labeled": labeled,
        "test": test,
        "coefficients": coefficients,
        "cv_seed": cv_seed,
    }


def default_frl_configs(p: int = 2) -> list[dict]:
    return [
        {"method": "pca", "p": p},
        {"method": "kpca", "kernel": "gaussian", "p": p},
        {"method": "kpca", "kernel": "polynomial", "p": p},
        {"method": "kpca", "kernel": "sigmoid", "p": p},
        {"method": "kpca", "kernel": "cosine", "p": p},
    ]


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    method: str
    sigma: float
    n: int
    rep: int
    mse: float
    acc: float | None = None
    ce: float | None = None
    tau: float | None = None
    runtime_ms: float = 0.0
    weights: tuple = ()


@dataclass(frozen=True)
class SuiteSettings:
    frl_configs: tuple = ()
    k_folds: int = 5
    ridge_lambda: float = 1e-6
    solver_max_iter: int = 10000
    solver_tol: float = 1e-9

    def resolved_frls(self) -> list[dict]:
        return list(self.frl_configs) if self.frl_configs else default_frl_configs()


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("PEARL_THREADS", "1"))
    return max(1, threads)


def _fit_rep_model(data: dict, settings: SuiteSettings, pool: CandidatePool | None = None):
    frls = tuple(fit_frl(cfg, data["unlabeled"]) for cfg in settings.resolved_frls())
    labeled = data["labeled"]
    plan = make_cv_plan(labeled.n, settings.k_folds, data["cv_seed"])
    model = pearl_fit(
        labeled,
        frls,
        pool=pool,
        plan=plan,
        downstream=DownstreamConfig(model="ridge", ridge_lambda=settings.ridge_lambda),
        solver_max_iter=settings.solver_max_iter,
        solver_tol=settings.solver_tol,
    )
    return model


def _run_cell_rep(config: SyntheticConfig, rep: int, settings: SuiteSettings) -> list[ExperimentRow]:
    data = generate_synthetic(config, rep)
    test = data["test"]
    t0 = time.perf_counter()
    model = _fit_rep_model(data, settings)
    pearl_block = model.predict(test.features)
    pearl_ms = (time.perf_counter() - t0) * 1e3
    rows = [
        ExperimentRow(
            method="pearl",
            sigma=config.sigma,
            n=config.n_labeled,
            rep=rep,
            mse=metric_suite(test.target, pearl_block)["mse"],
            runtime_ms=pearl_ms,
            weights=tuple(float(x) for x in model.weights),
        )
    ]
    for kind in BASELINES:
        t0 = time.perf_counter()
        block, _ = run_baseline(kind, model, test.features, test_truth=test.target)
        ms = (time.perf_counter() - t0) * 1e3
        rows.append(
            ExperimentRow(
                method=kind,
                sigma=config.sigma,
                n=config.n_labeled,
                rep=rep,
                mse=metric_suite(test.target, block)["mse"],
                runtime_ms=ms,
            )
        )
    return rows


def run_synthetic_suite(
    sigmas: Sequence[float],
    ns: Sequence[int],
    config: SyntheticConfig | None = None,
    settings: SuiteSettings | None = None,
    threads: int | None = None,
    max_failure_fraction: float = 0.05,
) -> list[ExperimentRow]:
    """Run every (sigma, n, rep) cell; per-rep failures are recorded and
    excluded, and the suite fails outright if more than 5% of reps error.
    Repetitions may run in parallel (PEARL_THREADS); rows are sorted into a
    canonical order before returning, so parallelism never changes output."""
    base = config or SyntheticConfig(sigma=0.5, n_labeled=100)
    settings = settings or SuiteSettings()
    cells = [
        (replace(base, sigma=float(s), n_labeled=int(n)), rep)
        for s in sigmas
        for n in ns
        for rep in range(base.reps)
    ]
    workers = _threads(threads)
    failures: list[str] = []
    rows: list[ExperimentRow] = []

    def _task(cell):
        cfg, rep = cell
        return _run_cell_rep(cfg, rep, settings)

    if workers == 1:
        outcomes = []
        for cell in cells:
            try:
                outcomes.append(_task(cell))
            except Exception as exc:
                outcomes.append(exc)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_task, cell) for cell in cells]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:
                    outcomes.append(exc)
    for (cfg, rep), outcome in zip(cells, outcomes):
        if isinstance(outcome, Exception):
            failures.append(f"sigma={cfg.sigma} n={cfg.n_labeled} rep={rep}: {outcome}")
        else:
            rows.extend(outcome)
    if failures and len(failures) > max_failure_fraction * len(cells):
        detail = "; ".join(failures[:5])
        raise RuntimeError(f"{len(failures)}/{len(cells)} repetitions failed: {detail}")
    method_order = {m: i for i, m in enumerate(METHODS)}
    rows.sort(key=lambda r: (r.sigma, r.n, r.rep, method_order[r.method]))
    return rows


# ---------------------------------------------------------------------------
# Weight-consistency experiment
# ---------------------------------------------------------------------------


def _oracle_pool(dims: Sequence[int]) -> tuple[CandidatePool, int]:
    """Subsets over the leading learners plus one explicit oracle singleton
    (the oracle learner is the last foundation index and never appears in
    any combinatorial subset)."""
    m_mis = len(dims) - 1
    specs = frl_subset_specs(m_mis) + (
        CandidateSpec(EXPLICIT, (m_mis,), name="oracle"),
    )
    pool = CandidatePool(specs=specs, foundation_dims=tuple(dims))
    return pool, pool.size - 1


def run_weight_consistency(
    ns: Sequence[int],
    sigma: float = 0.5,
    reps: int = 10,
    config: SyntheticConfig | None = None,
    settings: SuiteSettings | None = None,
    include_oracle: bool = True,
    threads: int | None = None,
) -> dict:
    """Total weight landing on the oracle candidate as n grows.

    The candidate pool is every nonempty subset of the misspecified learners
    plus one explicit candidate whose representation is the true feature
    vector; tau is that candidate's weight (0 when the oracle is excluded).
    Returns {"detail": [(n, rep, tau)], "curve": [(n, mean_tau, sd_tau)]}.
    """
    base = config or SyntheticConfig(sigma=sigma, n_labeled=100)
    base = replace(base, sigma=float(sigma), reps=int(reps))
    settings = settings or SuiteSettings()

    def _one(n: int, rep: int) -> tuple[int, int, float]:
        cfg = replace(base, n_labeled=int(n))
        data = generate_synthetic(cfg, rep)
        frl_cfgs = settings.resolved_frls()
        if include_oracle:
            frl_cfgs = frl_cfgs + [{"method": "custom", "name": ORACLE_FRL_NAME}]
        frls = tuple(fit_frl(c, data["unlabeled"]) for c in frl_cfgs)
        dims = [f.output_dim for f in frls]
        if include_oracle:
            pool, oracle_idx = _oracle_pool(dims)
        else:
            pool, oracle_idx = None, None
        labeled = data["labeled"]
        plan = make_cv_plan(labeled.n, settings.k_folds, data["cv_seed"])
        model = pearl_fit(
            labeled,
            frls,
            pool=pool,
            plan=plan,
            downstream=DownstreamConfig(model="ridge", ridge_lambda=settings.ridge_lambda),
            solver_max_iter=settings.solver_max_iter,
            solver_tol=settings.solver_tol,
        )
        tau = float(model.weights[oracle_idx]) if include_oracle else 0.0
        return int(n), rep, tau

    jobs = [(int(n), rep) for n in ns for rep in range(int(reps))]
    workers = _threads(threads)
    if workers == 1:
        detail = [_one(n, rep) for n, rep in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_:
            detail = list(pool_.map(lambda job: _one(*job), jobs))
    detail.sort(key=lambda t: (t[0], t[1]))
    curve = []
    for n in sorted({int(n) for n in ns}):
        taus = np.array([t for nn, _, t in detail if nn == n])
        sd = float(taus.std(ddof=1)) if taus.size > 1 else 0.0
        curve.append((n, float(taus.mean()), sd))
    return {"detail": detail, "curve": curve}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

TIDY_COLUMNS = ("method", "sigma", "n", "rep", "mse", "acc", "ce", "tau", "runtime_ms")

_AGG_METRICS = ("mse", "acc", "ce", "tau", "runtime_ms")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(rows: Sequence[ExperimentRow], out_dir, include_runtime: bool = False) -> dict:
    """Write the tidy per-rep CSV and the per-cell mean/sd aggregate.

    Files are newline-terminated with '.' decimals and a stable column and
    row order, and are byte-identical across reruns of the same seeded
    suite. Wall-clock runtimes are volatile, so the runtime_ms column is
    left empty unless include_runtime=True.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"

    method_order = {m: i for i, m in enumerate(METHODS)}
    rows = sorted(rows, key=lambda r: (r.sigma, r.n, r.rep, method_order.get(r.method, 99)))

    with open(results_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TIDY_COLUMNS) + "\n")
        for r in rows:
            cells = [
                r.method,
                _fmt(float(r.sigma)),
                str(int(r.n)),
                str(int(r.rep)),
                _fmt(float(r.mse)),
                _fmt(r.acc if r.acc is None else float(r.acc)),
                _fmt(r.ce if r.ce is None else float(r.ce)),
                _fmt(r.tau if r.tau is None else float(r.tau)),
                _fmt(float(r.runtime_ms)) if include_runtime else "",
            ]
            fh.write(",".join(cells) + "\n")

    cells_keys = sorted(
        {(r.sigma, r.n, r.method) for r in rows},
        key=lambda t: (t[0], t[1], method_order.get(t[2], 99)),
    )
    header = ["method", "sigma", "n", "reps"]
    for m in _AGG_METRICS:
        header += [f"{m}_mean", f"{m}_sd"]
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for sigma, n, method in cells_keys:
            group = [r for r in rows if (r.sigma, r.n, r.method) == (sigma, n, method)]
            out = [method, _fmt(float(sigma)), str(int(n)), str(len(group))]
            for metric in _AGG_METRICS:
                if metric == "runtime_ms" and not include_runtime:
                    out += ["", ""]
                    continue
                vals = [getattr(r, metric) for r in group if getattr(r, metric) is not None]
                if not vals:
                    out += ["", ""]
                    continue
                arr = np.asarray(vals, dtype=np.float64)
                mean = float(arr.mean())
                sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
                out += [_fmt(mean), _fmt(sd)]
            fh.write(",".join(out) + "\n")
    return {"results": results_path, "summary": summary_path}


def emit_consistency_report(result: dict, out_dir) -> dict:
    """CSV pair for the weight-consistency run: per-rep taus plus the curve."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    detail_path = out_dir / "consistency.csv"
    curve_path = out_dir / "consistency_curve.csv"
    with open(detail_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,rep,tau\n")
        for n, rep, tau in result["detail"]:
            fh.write(f"{int(n)},{int(rep)},{_fmt(float(tau))}\n")
    with open(curve_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,tau_mean,tau_sd\n")
        for n, mean, sd in result["curve"]:
            fh.write(f"{int(n)},{_fmt(float(mean))},{_fmt(float(sd))}\n")
    return {"detail": detail_path, "curve": curve_path}
