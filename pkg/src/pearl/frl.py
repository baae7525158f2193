"""Foundation representation learners: PCA, kernel PCA, identity, and
registered custom transformers.

Each learner is fit on unlabeled rows and afterwards maps feature rows to a
fixed-width representation. Fitted models are immutable and reusable; the
`transform` of a d-vector always yields exactly `output_dim` finite reals.

PCA convention: loadings are the top right singular vectors of the centered
data (orthonormal columns), scores are plain projections of the centered
rows, and each loading column is sign-fixed so its largest-magnitude entry
is nonnegative.

KPCA convention: the N x N kernel matrix is double-centered,
K_c = K - rowmean - colmean + grandmean, eigenvectors v_k with eigenvalue
lambda_k > 1e-10 are kept and stored scaled by lambda_k^(-1/2), so that
transforming a row means centering its kernel column consistently and
projecting onto the stored vectors. Transforming a training row reproduces
its training score.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .core import UnlabeledDataset, seeded_rng

KERNEL_KINDS = ("linear", "gaussian", "polynomial", "sigmoid", "cosine")

EIG_FLOOR = 1e-10

# Dense eigendecomposition below this many rows; Lanczos (deterministic
# start vector) above, where full factorization would dominate runtime.
DENSE_EIG_MAX_N = 600

_LANCZOS_SEED = 0x5EED


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters; None means 'resolve at fit time'.

    gaussian: exp(-gamma ||u - v||^2), default gamma = 1 / (d * var(data)).
    polynomial: (gamma <u, v> + coef0)^degree, defaults gamma=1/d, coef0=1.
    sigmoid: tanh(gamma <u, v> + coef0), defaults gamma=1/d, coef0=0.
    cosine: <u, v> / (||u|| ||v||), 0 whenever either norm is 0.
    """

    kind: str
    gamma: float | None = None
    degree: int = 3
    coef0: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be an integer >= 1")
            object.__setattr__(self, "degree", int(self.degree))

    def resolved(self, train: np.ndarray) -> "KernelSpec":
        """Fill unset hyperparameters from the training matrix."""
        d = train.shape[1]
        gamma, coef0 = self.gamma, self.coef0
        if self.kind == "gaussian" and gamma is None:
            var = float(train.var())
            gamma = 1.0 / (d * var) if var > 0 else 1.0 / d
        elif self.kind in ("polynomial", "sigmoid"):
            if gamma is None:
                gamma = 1.0 / d
            if coef0 is None:
                coef0 = 1.0 if self.kind == "polynomial" else 0.0
        return KernelSpec(self.kind, gamma, self.degree, coef0)


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise kernel values k(A_i, B_j); non-finite output is a hard error."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if spec.kind == "linear":
        K = A @ B.T
    elif spec.kind == "gaussian":
        sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
        np.maximum(sq, 0.0, out=sq)
        K = np.exp(-spec.gamma * sq)
    elif spec.kind == "polynomial":
        K = (spec.gamma * (A @ B.T) + spec.coef0) ** spec.degree
    elif spec.kind == "sigmoid":
        K = np.tanh(spec.gamma * (A @ B.T) + spec.coef0)
    else:  # cosine
        na = np.linalg.norm(A, axis=1)
        nb = np.linalg.norm(B, axis=1)
        na = np.where(na > 0, na, 1.0)
        nb = np.where(nb > 0, nb, 1.0)
        K = (A / na[:, None]) @ (B / nb[:, None]).T
    if not np.all(np.isfinite(K)):
        raise ValueError(f"{spec.kind} kernel produced non-finite values")
    return K


@dataclass
class FittedFrl:
    """A trained representation learner mapping d-vectors to output_dim reals."""

    kind: str  # pca | kpca | identity | custom
    input_dim: int
    output_dim: int
    warnings: tuple = ()
    # pca
    mean_: np.ndarray | None = None
    components_: np.ndarray | None = None  # (d, p), orthonormal columns
    # kpca
    kernel: KernelSpec | None = None
    train_: np.ndarray | None = None
    alphas_: np.ndarray | None = None  # (N, p), eigenvectors / sqrt(eigenvalue)
    eigenvalues_: np.ndarray | None = None
    col_means_: np.ndarray | None = None
    grand_mean_: float = 0.0
    # custom
    transformer: Any = None
    name: str | None = None

    def transform(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("transform expects a 2-D row matrix")
        if rows.shape[1] != self.input_dim:
            raise ValueError(
                f"transform: expected {self.input_dim} columns, got {rows.shape[1]}"
            )
        if self.kind == "identity":
            return rows.copy()
        if self.kind == "pca":
            return (rows - self.mean_) @ self.components_
        if self.kind == "kpca":
            Kx = kernel_matrix(self.kernel, rows, self.train_)
            Kx = Kx - Kx.mean(axis=1, keepdims=True) - self.col_means_[None, :] + self.grand_mean_
            return Kx @ self.alphas_
        out = np.asarray(self.transformer.transform(rows), dtype=np.float64)
        if out.shape != (rows.shape[0], self.output_dim) or not np.all(np.isfinite(out)):
            raise ValueError(f"custom transformer {self.name!r} returned a bad matrix")
        return out


def transform(model: FittedFrl, rows: np.ndarray) -> np.ndarray:
    return model.transform(rows)


def _fix_signs(columns: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made nonnegative (first on ties).
    for k in range(columns.shape[1]):
        i = int(np.argmax(np.abs(columns[:, k])))
        if columns[i, k] < 0:
            columns[:, k] = -columns[:, k]
    return columns


def _features(data) -> np.ndarray:
    if isinstance(data, UnlabeledDataset):
        return data.features
    return UnlabeledDataset(np.asarray(data, dtype=np.float64)).features


def fit_pca(data, p: int) -> FittedFrl:
    """PCA on column-centered data; loadings are top-p right singular vectors.

    Requires 1 <= p <= min(N-1, d). Rank-deficient data shrinks the output
    dimension to the numerical rank and records a warning.
    """
    X = _features(data)
    N, d = X.shape
    if not 1 <= p <= min(N - 1, d):
        raise ValueError(f"p={p} out of range for N={N}, d={d}")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    if s[0] <= 0.0:
        raise ValueError("data has zero variance, no principal directions exist")
    rank = int(np.sum(s > s[0] * max(N, d) * np.finfo(np.float64).eps))
    warnings = ()
    if p > rank:
        warnings = (f"rank_deficient: requested p={p}, keeping numerical rank {rank}",)
        p = rank
    components = _fix_signs(Vt[:p].T.copy())
    return FittedFrl(
        kind="pca",
        input_dim=d,
        output_dim=p,
        warnings=warnings,
        mean_=mean,
        components_=components,
    )


def fit_kpca(data, kernel: KernelSpec, p: int) -> FittedFrl:
    """Kernel PCA with double-centered kernel matrix.

    Keeps the top-p eigenpairs with eigenvalue > 1e-10; fewer available
    shrinks the output dimension with a recorded warning.
    """
    X = _features(data)
    N, d = X.shape
    if not 1 <= p <= N - 1:
        raise ValueError(f"p={p} out of range for N={N}")
    spec = kernel.resolved(X)
    K = kernel_matrix(spec, X, X)
    col_means = K.mean(axis=0)
    grand = float(K.mean())
    Kc = K - col_means[None, :] - col_means[:, None] + grand
    if N <= DENSE_EIG_MAX_N or p >= N - 2:
        vals, vecs = scipy.linalg.eigh(Kc, subset_by_index=(N - p, N - 1))
    else:
        v0 = seeded_rng(_LANCZOS_SEED).standard_normal(N)
        vals, vecs = scipy.sparse.linalg.eigsh(Kc, k=p, which="LA", v0=v0)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    keep = vals > EIG_FLOOR
    warnings = ()
    if not np.any(keep):
        raise ValueError("kernel matrix has no eigenvalue above the floor; degenerate kernel")
    if np.sum(keep) < p:
        warnings = (
            f"eig_floor: requested p={p}, keeping {int(np.sum(keep))} eigenpairs above 1e-10",
        )
    vals = vals[keep]
    vecs = vecs[:, keep]
    alphas = _fix_signs(vecs / np.sqrt(vals)[None, :])
    return FittedFrl(
        kind="kpca",
        input_dim=d,
        output_dim=alphas.shape[1],
        warnings=warnings,
        kernel=spec,
        train_=X,
        alphas_=alphas,
        eigenvalues_=vals,
        col_means_=col_means,
        grand_mean_=grand,
    )


def identity_frl(d: int) -> FittedFrl:
    """Pass-through learner; transform returns the input rows unchanged."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return FittedFrl(kind="identity", input_dim=d, output_dim=d)


# ---------------------------------------------------------------------------
# Custom learner plug-ins
# ---------------------------------------------------------------------------

# A factory takes the unlabeled feature matrix and returns any object with a
# transform(rows) -> (m, p) method.
_REGISTRY: dict[str, Callable[[np.ndarray], Any]] = {}


def register_frl(name: str, factory: Callable[[np.ndarray], Any]) -> None:
    _REGISTRY[name] = factory


def registered_frls() -> tuple:
    return tuple(sorted(_REGISTRY))


def fit_custom(name: str, data) -> FittedFrl:
    if name not in _REGISTRY:
        raise KeyError(f"no custom learner registered under {name!r}")
    X = _features(data)
    obj = _REGISTRY[name](X)
    probe = np.asarray(obj.transform(X[:1]), dtype=np.float64)
    if probe.ndim != 2 or probe.shape[0] != 1 or probe.shape[1] < 1:
        raise ValueError(f"custom learner {name!r} must transform rows to a 2-D matrix")
    return FittedFrl(
        kind="custom",
        input_dim=X.shape[1],
        output_dim=probe.shape[1],
        transformer=obj,
        name=name,
    )


def fit_frl(config: dict, data) -> FittedFrl:
    """Fit one learner from a config mapping: {method, p, kernel, params, name}."""
    method = config.get("method")
    if method == "pca":
        return fit_pca(data, int(config.get("p", 2)))
    if method == "kpca":
        params = config.get("params") or {}
        spec = KernelSpec(
            kind=config.get("kernel", "gaussian"),
            gamma=params.get("gamma"),
            degree=params.get("degree", 3),
            coef0=params.get("coef0"),
        )
        return fit_kpca(data, spec, int(config.get("p", 2)))
    if method == "identity":
        return identity_frl(_features(data).shape[1])
    if method == "custom":
        return fit_custom(config["name"], data)
    raise ValueError(f"unknown FRL method {method!r}")
