"""Dense pattern tensors, flattenings, and multiplicity-space block ranks.

A PatternTensor stores the joint state distribution (or any real tensor) over
a set of labelled positions, flat in the canonical index order: the first
label is the most significant base-4 digit, states ordered A < C < G < T.

The thin flattening of a tensor along a bipartition is the family of blocks
obtained by transforming the plain flattening into the symmetry-adapted bases
of both sides: for a G-invariant tensor the transformed matrix is block
diagonal with one block per (irrep, copy) pair and identical blocks across
copies, so only the first copy is kept; the largest entry outside the
permitted blocks (leakage) and the largest disagreement among copies are
reported as diagnostics rather than errors, since empirical tensors violate
invariance by sampling noise.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .groups import (
    EquivariantModel,
    MultiplicityVector,
    group_average,
    symmetry_adapted_basis,
)
from .trees import Bipartition

MAX_LEAVES = 12
STATE_INDEX = {"A": 0, "C": 1, "G": 2, "T": 3}
STATES = "ACGT"

STOCHASTIC_NEG_TOL = 1e-12
STOCHASTIC_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PatternTensor:
    """A real tensor over labelled positions, k states each.

    values : flat array of length k**n in canonical index order.
    labels : position labels, most significant first; leaf tensors use 1..n.
    stochastic : set when the entries form a probability distribution
        (non-negative up to 1e-12, total 1 up to 1e-9; checked on creation).
    """

    values: np.ndarray
    labels: tuple[int, ...]
    k: int = 4
    stochastic: bool = False

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        n = len(self.labels)
        if n > MAX_LEAVES:
            raise ValueError(f"{n} positions exceed the dense cap {MAX_LEAVES}")
        if values.shape != (self.k ** n,):
            raise ValueError(f"expected {self.k ** n} entries for {n} positions,"
                             f" got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("tensor entries must be finite")
        if len(set(self.labels)) != n:
            raise ValueError("duplicate position labels")
        if self.stochastic:
            if values.min() < -STOCHASTIC_NEG_TOL:
                raise ValueError("stochastic tensor has a negative entry")
            if abs(values.sum() - 1.0) > STOCHASTIC_SUM_TOL:
                raise ValueError("stochastic tensor does not sum to 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return len(self.labels)

    def nd(self) -> np.ndarray:
        return self.values.reshape((self.k,) * self.n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def with_canonical_labels(self) -> "PatternTensor":
        """Reorder axes so labels are ascending."""
        order = np.argsort(self.labels)
        if np.array_equal(order, np.arange(self.n)):
            return self
        values = self.nd().transpose(order).reshape(-1)
        return PatternTensor(values, tuple(sorted(self.labels)), self.k,
                             self.stochastic)

    @classmethod
    def from_pattern_counts(cls, counts: dict[str, float], n: int,
                            stochastic: bool = False) -> "PatternTensor":
        values = np.zeros(4 ** n)
        for pattern, weight in counts.items():
            if len(pattern) != n:
                raise ValueError(f"pattern {pattern!r} is not length {n}")
            idx = 0
            for ch in pattern:
                idx = idx * 4 + STATE_INDEX[ch]
            values[idx] += weight
        return cls(values, tuple(range(1, n + 1)), stochastic=stochastic)


def pattern_string(index: int, n: int) -> str:
    out = []
    for _ in range(n):
        out.append(STATES[index % 4])
        index //= 4
    return "".join(reversed(out))


def averaged(psi: PatternTensor, model: EquivariantModel) -> PatternTensor:
    """Group-average ``psi`` onto the exactly invariant tensors."""
    values = group_average(psi.values, model, psi.n)
    return replace(psi, values=values)


def invariance_gap(psi: PatternTensor, model: EquivariantModel) -> float:
    """Euclidean distance from ``psi`` to its group average."""
    return float(np.linalg.norm(psi.values - group_average(psi.values, model,
                                                           psi.n)))


# ---------------------------------------------------------------------------
# Flattenings
# ---------------------------------------------------------------------------

def _sides(psi: PatternTensor, split) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Normalize a Bipartition or an explicit (side1, side2) pair against the
    tensor's labels; each side comes back sorted ascending."""
    if isinstance(split, Bipartition):
        side1, side2 = split.sides
    else:
        side1, side2 = (frozenset(s) for s in split)
    if side1 & side2 or set(psi.labels) != side1 | side2:
        raise ValueError("split does not partition the tensor labels")
    if not side1 or not side2:
        raise ValueError("both sides of a split must be nonempty")
    return tuple(sorted(side1)), tuple(sorted(side2))


def flatten(psi: PatternTensor, split) -> np.ndarray:
    """Reshape along a bipartition: rows are joint states of the first side
    (for a Bipartition, the side containing leaf 1; leaves ascending), columns
    the other side.  A pure index permutation; the Frobenius norm equals the
    tensor norm."""
    side1, side2 = _sides(psi, split)
    pos = {lab: i for i, lab in enumerate(psi.labels)}
    axes = [pos[x] for x in side1] + [pos[x] for x in side2]
    return psi.nd().transpose(axes).reshape(psi.k ** len(side1),
                                            psi.k ** len(side2))


@dataclass(frozen=True)
class ThinFlattening:
    """Per-irrep multiplicity-space blocks of a flattening along a split.

    blocks[t] has shape m(l1)_t x m(l2)_t (possibly empty) and is the copy
    r=1 block; ``leakage`` is the largest transformed entry outside all
    (irrep, copy) diagonal blocks and ``copy_disagreement`` the largest
    entrywise gap between any copy's block and the first, both of which
    vanish (to 1e-10) on exactly invariant tensors.

    Raw block entries depend on the multiplicity-space bases chosen during
    basis construction; their singular values (hence all ranks and scores
    downstream) do not, since the bases are orthonormal.
    """

    split: object
    model_name: str
    blocks: tuple[np.ndarray, ...]
    dims: tuple[int, ...]
    row_mult: MultiplicityVector
    col_mult: MultiplicityVector
    leakage: float
    copy_disagreement: float


def thin_flatten(psi: PatternTensor, split,
                 model: EquivariantModel) -> ThinFlattening:
    """Transform the flattening into the symmetry-adapted bases of the two
    sides and return the per-irrep blocks plus invariance diagnostics."""
    side1, side2 = _sides(psi, split)
    l1, l2 = len(side1), len(side2)
    basis1 = symmetry_adapted_basis(model, l1)
    basis2 = symmetry_adapted_basis(model, l2)
    mat = flatten(psi, split)
    # transformed[i, j] = (column i of basis1) . M . (column j of basis2)
    half = basis1.matrix.T @ mat            # sparse @ dense -> dense
    transformed = (basis2.matrix.T @ half.T).T
    transformed = np.asarray(transformed)

    blocks = []
    off_block = np.abs(transformed)
    disagreement = 0.0
    for t, d in enumerate(model.dims):
        first = None
        for r in range(d):
            rows = basis1.columns(t, r)
            cols = basis2.columns(t, r)
            block = transformed[rows.start:rows.stop, cols.start:cols.stop]
            off_block[rows.start:rows.stop, cols.start:cols.stop] = 0.0
            if r == 0:
                first = block
                blocks.append(block.copy())
            elif block.size:
                disagreement = max(disagreement,
                                   float(np.abs(block - first).max()))
    leakage = float(off_block.max()) if off_block.size else 0.0
    return ThinFlattening(split, model.name, tuple(blocks), model.dims,
                          basis1.multiplicities, basis2.multiplicities,
                          leakage, disagreement)


def reassemble_flattening(tf: ThinFlattening,
                          model: EquivariantModel) -> np.ndarray:
    """Inverse of thin_flatten for invariant input: replicate each block over
    its copies, transform back to the pattern bases."""
    l1, l2 = tf.row_mult.power, tf.col_mult.power
    basis1 = symmetry_adapted_basis(model, l1)
    basis2 = symmetry_adapted_basis(model, l2)
    size1, size2 = 4 ** l1, 4 ** l2
    transformed = np.zeros((size1, size2))
    for t, d in enumerate(model.dims):
        for r in range(d):
            rows = basis1.columns(t, r)
            cols = basis2.columns(t, r)
            transformed[rows.start:rows.stop, cols.start:cols.stop] = tf.blocks[t]
    half = basis2.matrix @ transformed.T
    return np.asarray((basis1.matrix @ half.T))


@dataclass(frozen=True)
class RankVector:
    """Numerical ranks of the thin-flattening blocks at a shared relative
    threshold: singular values above tol * (largest singular value across all
    blocks) count.  ``total`` sums the entries; ``weighted`` weights each by
    its irrep dimension, matching the rank of the plain flattening for
    invariant tensors."""

    entries: tuple[int, ...]
    tolerance: float
    total: int
    weighted: int

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, t: int) -> int:
        return self.entries[t]


def thin_rank(tf: ThinFlattening, tol: float = 1e-7) -> RankVector:
    """Blockwise numerical rank of a thin flattening.

    The threshold is relative to the largest singular value over the whole
    thin flattening, not per block, so near-zero blocks of noisy data do not
    inflate the rank.  Empty and all-zero blocks have rank 0.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tolerance must lie in (0, 1)")
    spectra = [np.linalg.svd(b, compute_uv=False) if b.size else np.empty(0)
               for b in tf.blocks]
    sigma_max = max((s[0] for s in spectra if s.size), default=0.0)
    if sigma_max == 0.0:
        entries = tuple(0 for _ in tf.blocks)
    else:
        entries = tuple(int((s > tol * sigma_max).sum()) for s in spectra)
    total = sum(entries)
    weighted = sum(d * r for d, r in zip(tf.dims, entries))
    return RankVector(entries, tol, total, weighted)


def flattening_rank(mat: np.ndarray, tol: float = 1e-7) -> int:
    """Numerical rank of a plain flattening under the same relative rule."""
    spectrum = np.linalg.svd(mat, compute_uv=False)
    if spectrum.size == 0 or spectrum[0] == 0.0:
        return 0
    return int((spectrum > tol * spectrum[0]).sum())


# ---------------------------------------------------------------------------
# The gluing contraction
# ---------------------------------------------------------------------------

def star_contract(phi1: PatternTensor, phi2: PatternTensor,
                  shared: Iterable[int]) -> PatternTensor:
    """Contract two tensors over a shared set of positions.

    Pairs the two tensors against every basis vector of the shared positions
    and tensors the leftovers, i.e. an inner product over the shared axes;
    the result carries the surviving labels of ``phi1`` then ``phi2``.
    With a single shared position this is the gluing of two tensors at a
    common vertex.
    """
    shared = tuple(sorted(set(shared)))
    if not shared:
        raise ValueError("shared positions must be nonempty")
    if not set(shared) <= set(phi1.labels) & set(phi2.labels):
        raise ValueError("shared positions must appear in both tensors")
    pos1 = {lab: i for i, lab in enumerate(phi1.labels)}
    pos2 = {lab: i for i, lab in enumerate(phi2.labels)}
    axes1 = [pos1[z] for z in shared]
    axes2 = [pos2[z] for z in shared]
    out = np.tensordot(phi1.nd(), phi2.nd(), axes=(axes1, axes2))
    labels = tuple(l for l in phi1.labels if l not in shared) + \
        tuple(l for l in phi2.labels if l not in shared)
    return PatternTensor(out.reshape(-1), labels, phi1.k)


def identity_link(label_a: int, label_b: int, k: int = 4) -> PatternTensor:
    """The two-position tensor pairing equal states, sum_b b (x) b."""
    values = np.eye(k).reshape(-1)
    return PatternTensor(values, (label_a, label_b), k)


def permute_labels(psi: PatternTensor, mapping: dict[int, int]) -> PatternTensor:
    """Rename positions through a bijection and restore canonical label order."""
    new_labels = tuple(mapping.get(l, l) for l in psi.labels)
    renamed = PatternTensor(psi.values, new_labels, psi.k, psi.stochastic)
    return renamed.with_canonical_labels()


# ---------------------------------------------------------------------------
# Serialization: binary container and JSON debug form
# ---------------------------------------------------------------------------

_MAGIC = b"EQPT"
_VERSION = 1
_FLAG_STOCHASTIC = 1


def tensor_to_bytes(psi: PatternTensor) -> bytes:
    canonical = psi.with_canonical_labels()
    flags = _FLAG_STOCHASTIC if canonical.stochastic else 0
    header = _MAGIC + struct.pack("<HHHH", _VERSION, canonical.n,
                                  canonical.k, flags)
    return header + canonical.values.astype("<f8").tobytes()


def tensor_from_bytes(blob: bytes) -> PatternTensor:
    if blob[:4] != _MAGIC:
        raise ValueError("not a pattern-tensor container")
    version, n, k, flags = struct.unpack("<HHHH", blob[4:12])
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    values = np.frombuffer(blob[12:], dtype="<f8")
    return PatternTensor(values.copy(), tuple(range(1, n + 1)), k,
                         bool(flags & _FLAG_STOCHASTIC))


def save_tensor(psi: PatternTensor, path) -> None:
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(psi))


def load_tensor(path) -> PatternTensor:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


def tensor_to_json(psi: PatternTensor, include_zeros: bool = False) -> str:
    canonical = psi.with_canonical_labels()
    entries = [[pattern_string(i, canonical.n), v]
               for i, v in enumerate(canonical.values.tolist())
               if include_zeros or v != 0.0]
    return json.dumps({
        "n": canonical.n, "k": canonical.k, "states": STATES,
        "stochastic": canonical.stochastic, "entries": entries,
    })


def tensor_from_json(text: str) -> PatternTensor:
    doc = json.loads(text)
    counts = {pattern: value for pattern, value in doc["entries"]}
    return PatternTensor.from_pattern_counts(counts, doc["n"],
                                             stochastic=doc.get("stochastic",
                                                                False))
