"""YAML experiment configuration: defaults, loading, and object builders.

Schema (all keys optional, shown with defaults):

    seed: 1234
    task: regression            # regression | classification
    loss: null                  # squared_error | cross_entropy | hinge (null: by task)
    frls:                       # list of learner configs
      - {method: pca, p: 2}
      - {method: kpca, kernel: gaussian, p: 2, params: {gamma: null}}
      - {method: kpca, kernel: polynomial, p: 2}
      - {method: kpca, kernel: sigmoid, p: 2}
      - {method: kpca, kernel: cosine, p: 2}
    candidates:
      scheme: frl_subsets       # frl_subsets | fusion_columns | explicit
      explicit: []              # [{name: str, frls: [0, 1]}]
    downstream:
      model: ridge              # ridge | softmax
      ridge_lambda: 1.0e-6
      softmax_l2: 1.0e-4
      max_iter: 5000
      tol: 1.0e-6
    cv: {folds: 5}
    solver: {max_iter: 10000, tol: 1.0e-9}
    synthetic:
      sigmas: [0.1, 0.5, 0.9, 1.5]
      ns: [100, 200, 400, 800]
      reps: 20
      n_unlabeled: 2000
      n_test: 1000
      coeff_policy: per_rep     # per_rep | fixed
    consistency:
      sigma: 0.5
      ns: [50, 200, 1000, 2000]
      reps: 10
      include_oracle: true
"""

from __future__ import annotations

import copy

import yaml

from .bench import SuiteSettings, SyntheticConfig, default_frl_configs
from .candidates import (
    CandidatePool,
    enumerate_frl_subsets,
    enumerate_fusion_columns,
    explicit_pool,
)
from .core import CLASSIFICATION, REGRESSION, SURROGATE_LOSSES
from .downstream import DownstreamConfig


def default_config() -> dict:
    return {
        "seed": 1234,
        "task": REGRESSION,
        "loss": None,
        "frls": default_frl_configs(),
        "candidates": {"scheme": "frl_subsets", "explicit": []},
        "downstream": {
            "model": "ridge",
            "ridge_lambda": 1e-6,
            "softmax_l2": 1e-4,
            "max_iter": 5000,
            "tol": 1e-6,
        },
        "cv": {"folds": 5},
        "solver": {"max_iter": 10000, "tol": 1e-9},
        "synthetic": {
            "sigmas": [0.1, 0.5, 0.9, 1.5],
            "ns": [100, 200, 400, 800],
            "reps": 20,
            "n_unlabeled": 2000,
            "n_test": 1000,
            "coeff_policy": "per_rep",
        },
        "consistency": {
            "sigma": 0.5,
            "ns": [50, 200, 1000, 2000],
            "reps": 10,
            "include_oracle": True,
        },
    }


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ValueError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None) -> dict:
    """Merge a YAML file over the defaults and validate the result."""
    cfg = default_config()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ValueError(f"{path}: config must be a mapping")
        cfg = _merge(cfg, user)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["task"] not in (REGRESSION, CLASSIFICATION):
        raise ValueError(f"task must be regression or classification, got {cfg['task']!r}")
    if cfg["loss"] is not None and cfg["loss"] not in SURROGATE_LOSSES:
        raise ValueError(f"loss must be one of {SURROGATE_LOSSES}, got {cfg['loss']!r}")
    if cfg["candidates"]["scheme"] not in ("frl_subsets", "fusion_columns", "explicit"):
        raise ValueError("candidates.scheme must be frl_subsets, fusion_columns, or explicit")
    if not cfg["frls"]:
        raise ValueError("at least one FRL config is required")
    if int(cfg["cv"]["folds"]) < 2:
        raise ValueError("cv.folds must be >= 2")


def downstream_config(cfg: dict) -> DownstreamConfig:
    d = cfg["downstream"]
    return DownstreamConfig(
        model=d["model"],
        ridge_lambda=float(d["ridge_lambda"]),
        softmax_l2=float(d["softmax_l2"]),
        max_iter=int(d["max_iter"]),
        tol=float(d["tol"]),
    )


def build_pool(cfg: dict, foundation_dims) -> CandidatePool:
    scheme = cfg["candidates"]["scheme"]
    if scheme == "frl_subsets":
        return enumerate_frl_subsets(foundation_dims)
    if scheme == "fusion_columns":
        return enumerate_fusion_columns(foundation_dims)
    entries = cfg["candidates"]["explicit"]
    if not entries:
        raise ValueError("candidates.scheme=explicit needs a nonempty candidates.explicit list")
    return explicit_pool(
        [(e["name"], e["frls"]) for e in entries],
        foundation_dims,
    )


def synthetic_config(cfg: dict) -> SyntheticConfig:
    s = cfg["synthetic"]
    return SyntheticConfig(
        sigma=float(s["sigmas"][0]),
        n_labeled=int(s["ns"][0]),
        n_unlabeled=int(s["n_unlabeled"]),
        n_test=int(s["n_test"]),
        reps=int(s["reps"]),
        base_seed=int(cfg["seed"]),
        coeff_policy=s["coeff_policy"],
    )


def suite_settings(cfg: dict) -> SuiteSettings:
    return SuiteSettings(
        frl_configs=tuple(cfg["frls"]),
        k_folds=int(cfg["cv"]["folds"]),
        ridge_lambda=float(cfg["downstream"]["ridge_lambda"]),
        solver_max_iter=int(cfg["solver"]["max_iter"]),
        solver_tol=float(cfg["solver"]["tol"]),
    )
