"""Numerical membership tests for split and model constraints.

The primary split test is spectral: a bipartition is compatible with the data
tensor when every thin-flattening block has rank at most the one-site
multiplicity of its irrep, so the score aggregates the singular values beyond
that index.  Blocks are weighted by their irrep dimension, which makes the
score equal to the spectral tail of the plain flattening for invariant
tensors, and the whole thing is divided by the tensor norm so tolerances are
scale-free.

Determinant evaluation of the individual rank constraints is kept as an
exact, auditable witness: minors are enumerated in a frozen order (blocks in
irrep order, then row subsets lexicographically, then column subsets) under a
budget, since the largest model has ~3.7e7 of them per split.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Optional

import numpy as np

from .groups import EquivariantModel, MultiplicityVector, expected_rank_vector
from .tensors import (
    PatternTensor,
    RankVector,
    averaged,
    thin_flatten,
    thin_rank,
)
from .trees import Bipartition, TreeTopology

DEFAULT_RANK_TOL = 1e-7
DEFAULT_SCORE_TOL = 1e-8


@dataclass(frozen=True)
class SplitScore:
    """Rank-deficiency residual of one bipartition against the edge target.

    ``per_block_residuals[t]`` is the l2 mass of block t's singular values
    beyond the one-site multiplicity m_t; ``score`` aggregates them weighted
    by irrep dimension and normalized by the tensor norm.  Zero (to fp noise)
    exactly when every block satisfies its rank bound.
    """

    split: Bipartition
    per_block_residuals: tuple[float, ...]
    score: float
    expected: MultiplicityVector
    achieved: Optional[RankVector]  # None for trivial splits, never computed


def split_score(psi: PatternTensor, split: Bipartition,
                model: EquivariantModel, average: bool = True,
                rank_tol: float = DEFAULT_RANK_TOL) -> SplitScore:
    """Score a bipartition of the tensor's leaves as a candidate edge split.

    Empirical tensors are group-averaged first unless ``average`` is False.
    Trivial splits score 0 by construction: a side of one leaf makes every
    block at most m_t rows tall, so there is no spectral tail to measure.
    """
    target = model.multiplicities(1)
    if split.is_trivial:
        zeros = tuple(0.0 for _ in target.entries)
        return SplitScore(split, zeros, 0.0, target, None)
    scored = averaged(psi, model) if average and model.order > 1 else psi
    tf = thin_flatten(scored, split, model)
    residuals = []
    for t, block in enumerate(tf.blocks):
        if block.size == 0:
            residuals.append(0.0)
            continue
        spectrum = np.linalg.svd(block, compute_uv=False)
        tail = spectrum[target[t]:]
        residuals.append(float(np.sqrt((tail ** 2).sum())))
    norm = scored.norm()
    weighted = sum(d * r * r for d, r in zip(model.dims, residuals))
    score = float(np.sqrt(weighted) / norm) if norm > 0 else 0.0
    return SplitScore(split, tuple(residuals), score, target,
                      thin_rank(tf, rank_tol))


@dataclass(frozen=True)
class EdgeTestReport:
    """Outcome of testing a tensor against one topology's interior splits."""

    tree: TreeTopology
    passed: bool
    scores: tuple[SplitScore, ...]
    tol: float

    @property
    def total_score(self) -> float:
        return sum(s.score for s in self.scores)

    @property
    def max_score(self) -> float:
        return max((s.score for s in self.scores), default=0.0)


def edge_invariant_test(psi: PatternTensor, tree: TreeTopology,
                        model: EquivariantModel,
                        tol: float = DEFAULT_SCORE_TOL,
                        average: bool = True) -> EdgeTestReport:
    """Pass iff every interior edge split of ``tree`` scores at most ``tol``."""
    if psi.n != tree.n_leaves:
        raise ValueError("tensor and tree disagree on the leaf count")
    scored = averaged(psi, model) if average and model.order > 1 else psi
    scores = tuple(split_score(scored, s, model, average=False)
                   for s in sorted(tree.interior_splits(),
                                   key=Bipartition.sort_key))
    passed = all(s.score <= tol for s in scores)
    return EdgeTestReport(tree, passed, scores, tol)


@dataclass(frozen=True)
class GenericityEntry:
    split: Bipartition
    expected: tuple[int, ...]
    achieved: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.expected == self.achieved


@dataclass(frozen=True)
class GenericityReport:
    """Rank-achievement audit of a tensor against a candidate topology.

    The spectral decision procedure is only guaranteed on tensors whose every
    bipartition attains its ceiling rank; entries where the achieved block
    ranks differ from that ceiling flag data outside the guaranteed locus.
    """

    tree: TreeTopology
    entries: tuple[GenericityEntry, ...]

    @property
    def flagged(self) -> tuple[GenericityEntry, ...]:
        return tuple(e for e in self.entries if not e.ok)

    @property
    def generic(self) -> bool:
        return not self.flagged

    def warnings(self) -> list[str]:
        return [f"rank not generic at {e.split}: achieved {e.achieved}, "
                f"ceiling {e.expected}" for e in self.flagged]


def all_bipartitions(n: int, nontrivial_only: bool = False) -> list[Bipartition]:
    """Every bipartition of 1..n, in canonical order."""
    out = []
    low = 2 if nontrivial_only else 1
    for r in range(low, n - low + 1):
        for side in itertools.combinations(range(2, n + 1), r):
            out.append(Bipartition(side, n))
    out = sorted(set(out), key=Bipartition.sort_key)
    return out


def genericity_check(psi: PatternTensor, model: EquivariantModel,
                     tree: TreeTopology, rank_tol: float = DEFAULT_RANK_TOL,
                     average: bool = True) -> GenericityReport:
    """Verify the tensor attains the ceiling rank at every bipartition of the
    candidate tree (the hypothesis under which edge tests are decisive)."""
    n = psi.n
    if n > 10:
        raise ValueError("genericity audit capped at 10 leaves")
    if tree.n_leaves != n:
        raise ValueError("tensor and tree disagree on the leaf count")
    scored = averaged(psi, model) if average and model.order > 1 else psi
    entries = []
    for split in all_bipartitions(n):
        ceiling = expected_rank_vector(model, tree, split)
        tf = thin_flatten(scored, split, model)
        achieved = thin_rank(tf, rank_tol)
        entries.append(GenericityEntry(split, tuple(ceiling.entries),
                                       tuple(achieved.entries)))
    return GenericityReport(tree, tuple(entries))


# ---------------------------------------------------------------------------
# Generator catalog and exact minor evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockCatalog:
    irrep: int
    shape: tuple[int, int]
    target_rank: int
    minor_order: int
    count: int

    @property
    def degree(self) -> int:
        return self.minor_order


@dataclass(frozen=True)
class GeneratorCatalog:
    """Census of the determinantal constraints cutting out one edge split.

    Block t of the thin flattening contributes its (m_t+1)-minors; a block
    whose target rank is zero contributes its entries as linear constraints.
    """

    model_name: str
    row_power: int
    col_power: int
    blocks: tuple[BlockCatalog, ...]

    @property
    def total(self) -> int:
        return sum(b.count for b in self.blocks)

    @property
    def degree_set(self) -> frozenset[int]:
        return frozenset(b.degree for b in self.blocks if b.count > 0)

    def count_for_degree(self, degree: int) -> int:
        return sum(b.count for b in self.blocks if b.degree == degree)


def generator_catalog(model: EquivariantModel, row_power: int,
                      col_power: int) -> GeneratorCatalog:
    if row_power < 1 or col_power < 1:
        raise ValueError("tensor powers must be at least 1")
    target = model.multiplicities(1)
    row_mult = model.multiplicities(row_power)
    col_mult = model.multiplicities(col_power)
    blocks = []
    for t in range(model.n_irreps):
        a, b, m = row_mult[t], col_mult[t], target[t]
        order = m + 1
        count = comb(a, order) * comb(b, order)
        blocks.append(BlockCatalog(t, (a, b), m, order, count))
    return GeneratorCatalog(model.name, row_power, col_power, tuple(blocks))


@dataclass(frozen=True)
class MinorEvaluation:
    max_abs_minor: float
    evaluated: int
    exhausted: bool
    budget: int


def evaluate_generators(psi: PatternTensor, split: Bipartition,
                        model: EquivariantModel, budget: int,
                        average: bool = True) -> MinorEvaluation:
    """Evaluate the determinantal constraints at the tensor, up to ``budget``.

    Enumeration order is frozen for reproducibility of budgeted runs:
    blocks in irrep order, row subsets lexicographically major, column
    subsets lexicographically within each row subset.  The maximum absolute
    minor is an exact membership witness: all minors vanish iff every block
    rank bound holds.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    scored = averaged(psi, model) if average and model.order > 1 else psi
    tf = thin_flatten(scored, split, model)
    target = model.multiplicities(1)
    best = 0.0
    evaluated = 0
    for t, block in enumerate(tf.blocks):
        order = target[t] + 1
        rows, cols = block.shape
        if rows < order or cols < order:
            continue
        for row_set in itertools.combinations(range(rows), order):
            sub_rows = block[list(row_set), :]
            remaining = budget - evaluated
            if remaining <= 0:
                return MinorEvaluation(best, evaluated, False, budget)
            col_sets = list(itertools.islice(
                itertools.combinations(range(cols), order), remaining))
            stacked = np.stack([sub_rows[:, list(cs)] for cs in col_sets])
            dets = np.abs(np.linalg.det(stacked))
            best = max(best, float(dets.max()))
            evaluated += len(col_sets)
            if len(col_sets) < comb(cols, order):
                return MinorEvaluation(best, evaluated, False, budget)
    return MinorEvaluation(best, evaluated, True, budget)


# ---------------------------------------------------------------------------
# Model fit
# ---------------------------------------------------------------------------

def model_fit_score(psi: PatternTensor, model: EquivariantModel) -> float:
    """Relative violation of the linear constraints carving out the
    G-invariant tensors: ||psi - avg(psi)|| / ||psi||, zero iff exactly
    invariant.  Nested symmetries give nested scores: a larger group can only
    increase the residual."""
    norm = psi.norm()
    if norm == 0.0:
        raise ValueError("model fit is undefined for the zero tensor")
    gap = np.linalg.norm(psi.values - averaged(psi, model).values)
    return float(gap / norm)


# ---------------------------------------------------------------------------
# JSON report schema
# ---------------------------------------------------------------------------

def split_report(model: EquivariantModel, n: int,
                 scores: Iterable[SplitScore],
                 warnings: Iterable[str] = (),
                 extra: Optional[dict] = None) -> dict:
    """The machine-readable report: one record per bipartition scored."""
    doc = {
        "model": model.name,
        "n": n,
        "bipartitions": [
            {
                "split": str(s.split),
                "per_block_residuals": list(s.per_block_residuals),
                "score": s.score,
                "expected_rank": list(s.expected.entries),
                "achieved_rank": (list(s.achieved.entries)
                                  if s.achieved is not None else None),
            }
            for s in scores
        ],
        "warnings": list(warnings),
    }
    if extra:
        doc.update(extra)
    return doc
