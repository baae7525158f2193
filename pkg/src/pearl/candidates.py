"""Candidate representation sets built from the foundation matrices.

A candidate is either a subset of learner indices (concatenating their
score matrices in ascending index order), a subset of fusion-matrix columns
(the fusion matrix concatenates all learners), or an explicit named subset
of learner indices supplied by domain knowledge. Pool order is canonical,
ascending by subset size then lexicographic, so candidate j is stable
across runs and the all-learners candidate comes last. All indices are
0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

FRL_SUBSET = "frl_subset"
FUSION_COLUMNS = "fusion_columns"
EXPLICIT = "explicit"

MAX_SUBSET_FRLS = 20
MAX_FUSION_COLUMNS = 16


@dataclass(frozen=True)
class CandidateSpec:
    kind: str
    indices: tuple[int, ...]
    name: str | None = None

    def __post_init__(self):
        if self.kind not in (FRL_SUBSET, FUSION_COLUMNS, EXPLICIT):
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("candidate needs at least one index")
        if len(set(idx)) != len(idx):
            raise ValueError("candidate indices must be duplicate-free")
        if tuple(sorted(idx)) != idx:
            raise ValueError("candidate indices must be sorted ascending")
        if min(idx) < 0:
            raise ValueError("candidate indices must be nonnegative")
        object.__setattr__(self, "indices", idx)
        if self.kind == EXPLICIT and not self.name:
            raise ValueError("explicit candidates need a name")


@dataclass(frozen=True)
class CandidatePool:
    specs: tuple[CandidateSpec, ...]
    foundation_dims: tuple[int, ...]

    def __post_init__(self):
        specs = tuple(self.specs)
        dims = tuple(int(p) for p in self.foundation_dims)
        if not specs:
            raise ValueError("pool needs at least one candidate")
        if any(p < 1 for p in dims):
            raise ValueError("foundation dims must be >= 1")
        if len(set(specs)) != len(specs):
            raise ValueError("duplicate candidate specs in pool")
        total = sum(dims)
        for spec in specs:
            bound = total if spec.kind == FUSION_COLUMNS else len(dims)
            if max(spec.indices) >= bound:
                raise ValueError(f"candidate {spec} indexes out of range (bound {bound})")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "foundation_dims", dims)

    @property
    def size(self) -> int:
        return len(self.specs)

    def candidate_dim(self, j: int) -> int:
        spec = self.specs[j]
        if spec.kind == FUSION_COLUMNS:
            return len(spec.indices)
        return sum(self.foundation_dims[m] for m in spec.indices)

    def singleton_indices(self) -> tuple[int, ...]:
        """Positions of the single-learner candidates, one per learner index."""
        return tuple(
            j
            for j, s in enumerate(self.specs)
            if s.kind in (FRL_SUBSET, EXPLICIT) and len(s.indices) == 1
        )


def _ordered_subsets(items: Sequence[int]):
    for size in range(1, len(items) + 1):
        yield from combinations(items, size)


def frl_subset_specs(M: int) -> tuple[CandidateSpec, ...]:
    """The 2^M - 1 nonempty learner-subset specs in canonical order."""
    if not 1 <= M <= MAX_SUBSET_FRLS:
        raise ValueError(f"M={M} out of range [1, {MAX_SUBSET_FRLS}]")
    return tuple(CandidateSpec(FRL_SUBSET, subset) for subset in _ordered_subsets(range(M)))


def enumerate_frl_subsets(foundation_dims: Sequence[int]) -> CandidatePool:
    """All 2^M - 1 nonempty learner subsets, size-then-lexicographic order."""
    specs = frl_subset_specs(len(foundation_dims))
    return CandidatePool(specs=specs, foundation_dims=tuple(foundation_dims))


def enumerate_fusion_columns(foundation_dims: Sequence[int]) -> CandidatePool:
    """All 2^p - 1 nonempty fusion-column subsets, same canonical order."""
    p = sum(int(x) for x in foundation_dims)
    if p > MAX_FUSION_COLUMNS:
        raise ValueError(f"fusion matrix has {p} columns, above the {MAX_FUSION_COLUMNS} guard")
    specs = tuple(
        CandidateSpec(FUSION_COLUMNS, subset) for subset in _ordered_subsets(range(p))
    )
    return CandidatePool(specs=specs, foundation_dims=tuple(foundation_dims))


def explicit_pool(named_subsets: Sequence[tuple[str, Sequence[int]]],
                  foundation_dims: Sequence[int]) -> CandidatePool:
    specs = tuple(
        CandidateSpec(EXPLICIT, tuple(sorted(int(i) for i in idx)), name=name)
        for name, idx in named_subsets
    )
    return CandidatePool(specs=specs, foundation_dims=tuple(foundation_dims))


def with_explicit(pool: CandidatePool, name: str, frl_indices: Sequence[int]) -> CandidatePool:
    """Append one named learner-subset candidate to an existing pool."""
    extra = CandidateSpec(EXPLICIT, tuple(sorted(int(i) for i in frl_indices)), name=name)
    return CandidatePool(specs=pool.specs + (extra,), foundation_dims=pool.foundation_dims)


def _check_foundation(pool: CandidatePool, foundation: Sequence[np.ndarray]) -> int:
    if len(foundation) != len(pool.foundation_dims):
        raise ValueError("foundation matrix count does not match the pool")
    n = foundation[0].shape[0]
    for m, Z in enumerate(foundation):
        if Z.ndim != 2 or Z.shape != (n, pool.foundation_dims[m]):
            raise ValueError(
                f"foundation matrix {m}: expected shape ({n}, {pool.foundation_dims[m]}), "
                f"got {Z.shape}"
            )
    return n


def realize(pool: CandidatePool, foundation: Sequence[np.ndarray], j: int) -> np.ndarray:
    """Materialize candidate j as an (n, p_j) matrix. Pure and deterministic."""
    if not 0 <= j < pool.size:
        raise IndexError(f"candidate index {j} out of range [0, {pool.size})")
    _check_foundation(pool, foundation)
    spec = pool.specs[j]
    if spec.kind == FUSION_COLUMNS:
        fusion = np.hstack([np.asarray(Z, dtype=np.float64) for Z in foundation])
        return fusion[:, list(spec.indices)]
    return np.hstack([np.asarray(foundation[m], dtype=np.float64) for m in spec.indices])


def realize_all(pool: CandidatePool, foundation: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [realize(pool, foundation, j) for j in range(pool.size)]
