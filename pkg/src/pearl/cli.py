"""Command-line entry points.

    pearl run-synthetic --config cfg.yaml --out results/
    pearl weight-consistency --config cfg.yaml [--out dir/]
    pearl fit --data train.csv --label y --config cfg.yaml --out model.pkl
    pearl predict --model model.pkl --data new.csv --out preds.csv
    pearl bench-solver [--rows N] [--candidates J] [--reps R]

PEARL_THREADS caps repetition-level parallelism for the synthetic commands;
PEARL_PURE_PYTHON=1 forces the pure-numpy solver backend.
"""

from __future__ import annotations

import argparse
import csv
import pickle
import sys
import time

import numpy as np

from . import bench, config as config_mod
from .core import CLASSIFICATION, read_labeled_csv
from .frl import fit_frl
from .weights import SOLVER_BACKEND, make_cv_plan, pearl_fit


def _cmd_run_synthetic(args) -> int:
    cfg = config_mod.load_config(args.config)
    syn = cfg["synthetic"]
    rows = bench.run_synthetic_suite(
        sigmas=[float(s) for s in syn["sigmas"]],
        ns=[int(n) for n in syn["ns"]],
        config=config_mod.synthetic_config(cfg),
        settings=config_mod.suite_settings(cfg),
        threads=args.threads,
    )
    paths = bench.emit_report(rows, args.out, include_runtime=args.runtimes)
    print(f"wrote {paths['results']}")
    print(f"wrote {paths['summary']}")
    return 0


def _cmd_weight_consistency(args) -> int:
    cfg = config_mod.load_config(args.config)
    cons = cfg["consistency"]
    result = bench.run_weight_consistency(
        ns=[int(n) for n in cons["ns"]],
        sigma=float(cons["sigma"]),
        reps=int(cons["reps"]),
        config=config_mod.synthetic_config(cfg),
        settings=config_mod.suite_settings(cfg),
        include_oracle=bool(cons["include_oracle"]),
        threads=args.threads,
    )
    print("n,tau_mean,tau_sd")
    for n, mean, sd in result["curve"]:
        print(f"{n},{mean!r},{sd!r}")
    if args.out:
        paths = bench.emit_consistency_report(result, args.out)
        print(f"wrote {paths['detail']}", file=sys.stderr)
        print(f"wrote {paths['curve']}", file=sys.stderr)
    return 0


def _cmd_fit(args) -> int:
    cfg = config_mod.load_config(args.config)
    train = read_labeled_csv(args.data, args.label, task=cfg["task"])
    if args.unlabeled:
        unlabeled, feature_columns = _read_features(args.unlabeled, drop={args.label})
    else:
        unlabeled, feature_columns = train.features, None
    frls = tuple(fit_frl(c, unlabeled) for c in cfg["frls"])
    pool = config_mod.build_pool(cfg, [f.output_dim for f in frls])
    plan = make_cv_plan(train.n, int(cfg["cv"]["folds"]), int(cfg["seed"]))
    model = pearl_fit(
        train,
        frls,
        pool=pool,
        plan=plan,
        downstream=config_mod.downstream_config(cfg),
        loss=cfg["loss"],
        solver_max_iter=int(cfg["solver"]["max_iter"]),
        solver_tol=float(cfg["solver"]["tol"]),
    )
    payload = {
        "model": model,
        "label_column": args.label,
        "task": cfg["task"],
        "config": cfg,
    }
    with open(args.out, "wb") as fh:
        pickle.dump(payload, fh)
    report = model.solve_result.report()
    print(f"wrote {args.out}")
    print(
        f"candidates={model.pool.size} objective={report['objective']!r} "
        f"iterations={report['iterations']} backend={SOLVER_BACKEND}"
    )
    return 0


def _read_features(path: str, drop: set) -> tuple:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        keep = [i for i, h in enumerate(header) if h not in drop]
        names = [header[i] for i in keep]
        rows = []
        for row_no, row in enumerate(reader, start=2):
            try:
                rows.append([float(row[i]) for i in keep])
            except (ValueError, IndexError):
                raise ValueError(f"{path}: row {row_no}: unparsable feature row") from None
    return np.asarray(rows, dtype=np.float64), names


def _cmd_predict(args) -> int:
    with open(args.model, "rb") as fh:
        payload = pickle.load(fh)
    model = payload["model"]
    features, _ = _read_features(args.data, drop={payload["label_column"]})
    block = model.predict(features)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        if model.task == CLASSIFICATION:
            cols = ["prediction"] + [f"prob_{c}" for c in range(block.q)]
            fh.write(",".join(cols) + "\n")
            hard = np.argmax(block.values, axis=1)
            for i in range(block.n):
                probs = ",".join(repr(float(v)) for v in block.values[i])
                fh.write(f"{int(hard[i])},{probs}\n")
        else:
            fh.write("prediction\n")
            for v in block.values[:, 0]:
                fh.write(repr(float(v)) + "\n")
    print(f"wrote {args.out} ({block.n} rows)")
    return 0


def _cmd_bench_solver(args) -> int:
    from . import _solver_py

    backends = [("python", _solver_py)]
    try:
        from . import _solver_cy

        backends.append(("cython", _solver_cy))
    except ImportError:
        print("compiled backend not available; timing pure python only")
    rng = np.random.default_rng(0)
    n, J = args.rows, args.candidates
    y = rng.standard_normal(n)
    problems = {
        0: (y[:, None] + 0.3 * rng.standard_normal((n, J)), y),
        1: (rng.uniform(0.05, 0.95, size=(n, J)), np.zeros(n)),
        2: (rng.standard_normal((n, J)), np.zeros(n)),
    }
    names = {0: "squared_error", 1: "cross_entropy", 2: "hinge"}
    print(f"rows={n} candidates={J} reps={args.reps}")
    print(f"{'loss':<14}{'backend':<9}{'ms/solve':>10}{'objective':>14}{'iters':>7}")
    for kind, (P, yv) in problems.items():
        for name, impl in backends:
            t0 = time.perf_counter()
            for _ in range(args.reps):
                w, f, iters, kkt, flag = impl.solve(kind, P, yv, None, 10000, 1e-9, 1e-4, 0.5)
            ms = (time.perf_counter() - t0) * 1e3 / args.reps
            print(f"{names[kind]:<14}{name:<9}{ms:>10.3f}{f:>14.6g}{iters:>7}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pearl",
        description="Aggregated representation learning with cross-validated model averaging",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-synthetic", help="run the synthetic benchmark grid")
    p.add_argument("--config", default=None, help="YAML config file (defaults apply)")
    p.add_argument("--out", required=True, help="output directory for CSV reports")
    p.add_argument("--threads", type=int, default=None, help="parallel repetitions")
    p.add_argument(
        "--runtimes",
        action="store_true",
        help="fill runtime_ms with wall-clock values (breaks byte-reproducibility)",
    )
    p.set_defaults(func=_cmd_run_synthetic)

    p = sub.add_parser("weight-consistency", help="oracle-candidate weight experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="optional directory for CSV output")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_weight_consistency)

    p = sub.add_parser("fit", help="fit a model from a labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--label", required=True, help="name of the label column")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="pearl_model.pkl")
    p.add_argument("--unlabeled", default=None, help="optional unlabeled CSV for the learners")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="predict a CSV with a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bench-solver", help="compare solver backends")
    p.add_argument("--rows", type=int, default=800)
    p.add_argument("--candidates", type=int, default=31)
    p.add_argument("--reps", type=int, default=5)
    p.set_defaults(func=_cmd_bench_solver)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
