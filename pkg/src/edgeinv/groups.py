"""Permutation-group engine for the built-in substitution symmetries.

Each model is a subgroup G of the permutations of the four states A,C,G,T
together with explicit real orthogonal matrices for every irreducible
representation.  Everything downstream (multiplicity vectors, symmetry-adapted
bases of tensor powers, invariant projectors) is computed from these, with
character arithmetic done in exact integers.

Basis vectors of the l-fold tensor power are built orbit by orbit with the
matrix-element projectors E[t][r] = (d_t/|G|) sum_g D_t(g)[r,0] rho(g)^(x l):
the image of E[t][0] on lexicographically ordered pattern seeds gives the
multiplicity vectors, and E[t][r] maps those to the remaining copies.  Since
rho(g)^(x l) permutes patterns within a G-orbit, every basis vector has at
most |G| nonzero entries and the basis is held sparse.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .trees import Bipartition, TreeTopology, bough_counts

STATES = ("A", "C", "G", "T")
K = 4
MODEL_NAMES = ("GMM", "SSM", "K81", "K80", "JC69")

MAX_POWER = 12          # k^l capacity guard for multiplicities and bases
MAX_DENSE_POWER = 6     # dense k^l x k^l projector guard

Perm = tuple[int, ...]

_IDENTITY: Perm = (0, 1, 2, 3)


def _compose(g: Perm, h: Perm) -> Perm:
    """g after h."""
    return tuple(g[h[i]] for i in range(len(h)))


def _inverse(g: Perm) -> Perm:
    inv = [0] * len(g)
    for i, gi in enumerate(g):
        inv[gi] = i
    return tuple(inv)


def _closure(generators: Iterable[Perm]) -> tuple[Perm, ...]:
    elems = {_IDENTITY}
    frontier = list(generators)
    while frontier:
        g = frontier.pop()
        if g in elems:
            continue
        elems.add(g)
        for h in list(elems):
            for prod in (_compose(g, h), _compose(h, g)):
                if prod not in elems:
                    frontier.append(prod)
    return tuple(sorted(elems))


def _parity(g: Perm) -> int:
    inv = sum(1 for i in range(len(g)) for j in range(i + 1, len(g))
              if g[i] > g[j])
    return -1 if inv % 2 else 1


def _cycle_notation(g: Perm) -> str:
    seen: set[int] = set()
    cycles = []
    for start in range(len(g)):
        if start in seen or g[start] == start:
            seen.add(start)
            continue
        cyc = [start]
        seen.add(start)
        nxt = g[start]
        while nxt != start:
            cyc.append(nxt)
            seen.add(nxt)
            nxt = g[nxt]
        cycles.append("(" + "".join(STATES[i] for i in cyc) + ")")
    return "".join(cycles) if cycles else "id"


@dataclass(frozen=True)
class Irrep:
    """One irreducible representation: a name, its dimension, and the matrix
    D(g) for every group element (indexed like the model's element list)."""

    name: str
    dim: int
    matrices: np.ndarray  # shape (|G|, dim, dim), read-only


@dataclass(frozen=True)
class MultiplicityVector:
    """Per-irrep multiplicities of the l-fold tensor power of the state space."""

    entries: tuple[int, ...]
    power: int

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, t: int) -> int:
        return self.entries[t]

    def __len__(self) -> int:
        return len(self.entries)


class EquivariantModel:
    """A permutation group on the state alphabet plus explicit irreps.

    Instances are immutable after construction and verified on creation:
    group axioms, homomorphism property and orthogonality of every irrep,
    exact character orthogonality, sum d_t^2 = |G|, and the permutation
    character being the fixed-state count.
    """

    def __init__(self, name: str, elements: Sequence[Perm],
                 irreps: Sequence[Irrep]):
        self.name = name
        self.k = K
        self.states = STATES
        self.elements: tuple[Perm, ...] = tuple(elements)
        self.irreps: tuple[Irrep, ...] = tuple(irreps)
        self.order = len(self.elements)
        self.n_irreps = len(self.irreps)
        self.dims = tuple(ir.dim for ir in self.irreps)
        self._index = {g: i for i, g in enumerate(self.elements)}
        self.fixed_counts = np.array(
            [sum(1 for i in range(K) if g[i] == i) for g in self.elements],
            dtype=np.int64)
        # integral character values per element, exactness asserted
        chars = np.empty((self.n_irreps, self.order), dtype=np.int64)
        for t, ir in enumerate(self.irreps):
            traces = np.trace(ir.matrices, axis1=1, axis2=2)
            rounded = np.rint(traces)
            if not np.allclose(traces, rounded, atol=1e-9):
                raise AssertionError(f"{name}: non-integral character {ir.name}")
            chars[t] = rounded.astype(np.int64)
        self.characters = chars
        self.characters.setflags(write=False)
        self._classes = self._conjugacy_classes()
        self._verify()

    # -- structure ---------------------------------------------------------

    def _conjugacy_classes(self) -> tuple[tuple[int, ...], ...]:
        remaining = set(range(self.order))
        classes = []
        while remaining:
            i = min(remaining)
            g = self.elements[i]
            cls = {self._index[_compose(_compose(h, g), _inverse(h))]
                   for h in self.elements}
            classes.append(tuple(sorted(cls)))
            remaining -= cls
        classes.sort(key=lambda c: (len(c), self.elements[c[0]]))
        return tuple(classes)

    @property
    def conjugacy_classes(self) -> tuple[tuple[Perm, ...], ...]:
        return tuple(tuple(self.elements[i] for i in cls)
                     for cls in self._classes)

    @property
    def class_sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self._classes)

    @property
    def class_labels(self) -> tuple[str, ...]:
        return tuple(_cycle_notation(self.elements[c[0]]) for c in self._classes)

    def character_table(self) -> np.ndarray:
        """Integer table, rows = irreps, columns = conjugacy classes."""
        return np.stack([self.characters[:, c[0]] for c in self._classes],
                        axis=1)

    def permutation_character(self) -> tuple[int, ...]:
        """Fixed-state counts per conjugacy class."""
        return tuple(int(self.fixed_counts[c[0]]) for c in self._classes)

    def character_at(self, perm: Perm) -> int:
        """Fixed-state count of one explicit permutation."""
        return int(self.fixed_counts[self._index[perm]])

    def _verify(self) -> None:
        assert self.elements[0] == _IDENTITY
        for g in self.elements:
            assert _inverse(g) in self._index, f"{self.name}: missing inverse"
        for g in self.elements:
            for h in self.elements:
                assert _compose(g, h) in self._index, f"{self.name}: not closed"
        assert sum(d * d for d in self.dims) == self.order
        for ir in self.irreps:
            mats = ir.matrices
            assert np.allclose(mats[0], np.eye(ir.dim), atol=1e-12)
            for i, g in enumerate(self.elements):
                assert np.allclose(mats[i] @ mats[i].T, np.eye(ir.dim),
                                   atol=1e-12), f"{self.name}:{ir.name} not orthogonal"
                for j, h in enumerate(self.elements):
                    ij = self._index[_compose(g, h)]
                    assert np.allclose(mats[i] @ mats[j], mats[ij],
                                       atol=1e-12), f"{self.name}:{ir.name} not a homomorphism"
        # exact first orthogonality relation
        gram = self.characters @ self.characters.T
        assert np.array_equal(gram, self.order * np.eye(self.n_irreps,
                                                        dtype=np.int64))
        # the permutation character decomposes with non-negative multiplicities
        m = self.multiplicities(1)
        recomposed = np.zeros(self.order, dtype=np.int64)
        for t in range(self.n_irreps):
            recomposed += m[t] * self.characters[t]
        assert np.array_equal(recomposed, self.fixed_counts)

    def __repr__(self) -> str:
        return f"EquivariantModel({self.name}, |G|={self.order})"

    def __hash__(self) -> int:
        return hash(self.name)

    def __eq__(self, other) -> bool:
        return isinstance(other, EquivariantModel) and other.name == self.name

    # -- multiplicities ------------------------------------------------------

    def multiplicities(self, power: int) -> MultiplicityVector:
        """m(l): multiplicity of each irrep in the l-th tensor power.

        Exact integer arithmetic; raises on capacity beyond the guard.
        """
        if not 1 <= power <= MAX_POWER:
            raise ValueError(f"tensor power {power} outside guard 1..{MAX_POWER}")
        fixed = [int(c) for c in self.fixed_counts]
        entries = []
        for t in range(self.n_irreps):
            total = sum((f ** power) * int(self.characters[t, i])
                        for i, f in enumerate(fixed))
            if total % self.order:
                raise AssertionError("non-integral multiplicity")
            m = total // self.order
            assert m >= 0
            entries.append(m)
        assert sum(d * m for d, m in zip(self.dims, entries)) == K ** power
        return MultiplicityVector(tuple(entries), power)


# ---------------------------------------------------------------------------
# Built-in models
# ---------------------------------------------------------------------------

def _perm_matrices(elements: Sequence[Perm]) -> np.ndarray:
    mats = np.zeros((len(elements), K, K))
    for i, g in enumerate(elements):
        for a in range(K):
            mats[i, g[a], a] = 1.0
    return mats


def _one_dim(values: Sequence[float]) -> np.ndarray:
    return np.array(values, dtype=float).reshape(-1, 1, 1)


def _conjugated_rep(elements: Sequence[Perm], act, basis: np.ndarray,
                    size: int) -> np.ndarray:
    """Matrices U^T P(act(g)) U of the action ``act`` of each element on
    ``size`` objects, restricted to the column span of ``basis``."""
    dim = basis.shape[1]
    out = np.empty((len(elements), dim, dim))
    for i, g in enumerate(elements):
        perm = act(g)
        p_mat = np.zeros((size, size))
        for a in range(size):
            p_mat[perm[a], a] = 1.0
        out[i] = basis.T @ p_mat @ basis
    return out


def _build_gmm() -> EquivariantModel:
    return EquivariantModel("GMM", [_IDENTITY],
                            [Irrep("triv", 1, _one_dim([1.0]))])


def _build_ssm() -> EquivariantModel:
    elements = _closure([(3, 2, 1, 0)])  # (AT)(CG)
    signs = [1.0 if g == _IDENTITY else -1.0 for g in elements]
    return EquivariantModel("SSM", elements, [
        Irrep("triv", 1, _one_dim([1.0, 1.0])),
        Irrep("sgn", 1, _one_dim(signs)),
    ])


_HADAMARD_SIGNS = {
    # eigenvalue of each Hadamard vector under each Klein-group element
    "Abar": {(0, 1, 2, 3): 1, (1, 0, 3, 2): 1, (2, 3, 0, 1): 1, (3, 2, 1, 0): 1},
    "Cbar": {(0, 1, 2, 3): 1, (1, 0, 3, 2): 1, (2, 3, 0, 1): -1, (3, 2, 1, 0): -1},
    "Gbar": {(0, 1, 2, 3): 1, (1, 0, 3, 2): -1, (2, 3, 0, 1): 1, (3, 2, 1, 0): -1},
    "Tbar": {(0, 1, 2, 3): 1, (1, 0, 3, 2): -1, (2, 3, 0, 1): -1, (3, 2, 1, 0): 1},
}


def _build_k81() -> EquivariantModel:
    elements = _closure([(1, 0, 3, 2), (2, 3, 0, 1)])  # (AC)(GT), (AG)(CT)
    irreps = [Irrep(nm, 1, _one_dim([_HADAMARD_SIGNS[nm][g] for g in elements]))
              for nm in ("Abar", "Cbar", "Gbar", "Tbar")]
    return EquivariantModel("K81", elements, irreps)


def _build_k80() -> EquivariantModel:
    r = (1, 2, 3, 0)   # (ACGT)
    s = (2, 1, 0, 3)   # (AG)
    elements = _closure([r, s])
    decomposition = {}
    g = _IDENTITY
    for i in range(4):
        decomposition[g] = (i, 0)
        decomposition[_compose(g, s)] = (i, 1)
        g = _compose(r, g)
    rot90 = np.array([[0.0, -1.0], [1.0, 0.0]])
    flip = np.array([[1.0, 0.0], [0.0, -1.0]])
    irreps = []
    for nm, (eps, delta) in (("A1", (1, 1)), ("A2", (1, -1)),
                             ("B1", (-1, 1)), ("B2", (-1, -1))):
        irreps.append(Irrep(nm, 1, _one_dim(
            [eps ** decomposition[g][0] * delta ** decomposition[g][1]
             for g in elements])))
    two = np.empty((len(elements), 2, 2))
    for idx, g in enumerate(elements):
        i, j = decomposition[g]
        two[idx] = np.linalg.matrix_power(rot90, i) @ (flip if j else np.eye(2))
    irreps.append(Irrep("E", 2, two))
    return EquivariantModel("K80", elements, irreps)


_PAIR_PARTITIONS = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


def _partition_action(g: Perm) -> Perm:
    """Index permutation induced on the three pairings of the four states."""
    out = []
    for pair1, _ in _PAIR_PARTITIONS:
        image_pair = frozenset(g[x] for x in pair1)
        out.append(next(i for i, (p1, p2) in enumerate(_PAIR_PARTITIONS)
                        if image_pair in (frozenset(p1), frozenset(p2))))
    return tuple(out)


def _build_jc69() -> EquivariantModel:
    elements = _closure([(1, 0, 2, 3), (1, 2, 3, 0)])  # (AC), (ACGT): all of S4
    assert len(elements) == 24
    signs = [float(_parity(g)) for g in elements]
    hadamard3 = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                         dtype=float) / 2.0
    standard = _conjugated_rep(elements, lambda g: g, hadamard3, K)
    std_sign = standard * np.array(signs)[:, None, None]
    plane_basis = np.column_stack([
        np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0),
        np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0),
    ])
    plane = _conjugated_rep(elements, _partition_action, plane_basis, 3)
    return EquivariantModel("JC69", elements, [
        Irrep("triv", 1, _one_dim([1.0] * 24)),
        Irrep("sgn", 1, _one_dim(signs)),
        Irrep("plane", 2, plane),
        Irrep("std", 3, standard),
        Irrep("std-sgn", 3, std_sign),
    ])


_BUILDERS = {"GMM": _build_gmm, "SSM": _build_ssm, "K81": _build_k81,
             "K80": _build_k80, "JC69": _build_jc69}


@lru_cache(maxsize=None)
def builtin_model(name: str) -> EquivariantModel:
    """One of GMM, SSM, K81, K80, JC69; verified on first construction."""
    try:
        builder = _BUILDERS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from "
                         f"{', '.join(MODEL_NAMES)}") from None
    return builder()


def multiplicities(model: EquivariantModel, power: int) -> MultiplicityVector:
    return model.multiplicities(power)


# ---------------------------------------------------------------------------
# Pattern-index machinery for tensor powers
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def pattern_maps(model_name: str, power: int) -> np.ndarray:
    """Array of shape (|G|, k^l): row e sends pattern index p to g_e . p,
    where elements act diagonally on the l digits of p."""
    model = builtin_model(model_name)
    size = K ** power
    weights = K ** np.arange(power - 1, -1, -1, dtype=np.int64)
    idx = np.arange(size, dtype=np.int64)
    digits = (idx[:, None] // weights[None, :]) % K
    maps = np.empty((model.order, size), dtype=np.int64)
    for e, g in enumerate(model.elements):
        perm = np.array(g, dtype=np.int64)
        maps[e] = perm[digits] @ weights
    maps.setflags(write=False)
    return maps


def group_average(values: np.ndarray, model: EquivariantModel,
                  power: int) -> np.ndarray:
    """Orthogonal projection of a flat k^l tensor onto the G-invariants."""
    if model.order == 1:
        return np.asarray(values, dtype=float)
    maps = pattern_maps(model.name, power)
    acc = np.zeros(len(values))
    for row in maps:
        acc += values[row]
    return acc / model.order


def invariant_projector(model: EquivariantModel, power: int) -> np.ndarray:
    """Dense orthogonal projector onto the trivial isotypic component of the
    l-th tensor power; rank equals the trivial-character multiplicity."""
    if not 1 <= power <= MAX_DENSE_POWER:
        raise ValueError(f"dense projector guarded to power <= {MAX_DENSE_POWER}")
    size = K ** power
    maps = pattern_maps(model.name, power)
    proj = np.zeros((size, size))
    cols = np.arange(size)
    for row in maps:
        proj[row, cols] += 1.0 / model.order
    return proj


# ---------------------------------------------------------------------------
# Symmetry-adapted bases
# ---------------------------------------------------------------------------

class SymmetryAdaptedBasis:
    """Orthonormal basis of the l-th tensor power organized by
    (irrep t, copy r, multiplicity j), held as a sparse column matrix.

    Columns are grouped by (t, r) with the multiplicity index fastest, so the
    block of a transformed flattening that pairs copy r of irrep t on both
    sides occupies a contiguous submatrix.
    """

    def __init__(self, model: EquivariantModel, power: int,
                 matrix: sparse.csc_matrix, tags: tuple[tuple[int, int, int], ...]):
        self.model = model
        self.power = power
        self.matrix = matrix
        self.tags = tags
        self.multiplicities = model.multiplicities(power)
        self._ranges: dict[tuple[int, int], range] = {}
        offset = 0
        for t, m in enumerate(self.multiplicities.entries):
            for r in range(model.dims[t]):
                self._ranges[(t, r)] = range(offset, offset + m)
                offset += m
        assert offset == K ** power

    def columns(self, t: int, r: int) -> range:
        """Column range of copy r (0-based) of irrep t."""
        return self._ranges[(t, r)]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


_BASIS_CACHE: dict[tuple[str, int], SymmetryAdaptedBasis] = {}
_BASIS_LOCK = threading.Lock()


def symmetry_adapted_basis(model: EquivariantModel,
                           power: int) -> SymmetryAdaptedBasis:
    """Construct (or fetch from the process-wide cache) the adapted basis.

    Deterministic: seeds are standard pattern vectors in lexicographic order,
    orthonormalized by twice-through Gram-Schmidt within each G-orbit.
    Raises if any projector image rank disagrees with the multiplicity
    vector, which would mean a misdefined model.
    """
    if not 1 <= power <= MAX_POWER:
        raise ValueError(f"tensor power {power} outside guard 1..{MAX_POWER}")
    key = (model.name, power)
    cached = _BASIS_CACHE.get(key)
    if cached is not None:
        return cached
    basis = _build_basis(model, power)
    with _BASIS_LOCK:
        _BASIS_CACHE.setdefault(key, basis)
    return _BASIS_CACHE[key]


def _build_basis(model: EquivariantModel, power: int) -> SymmetryAdaptedBasis:
    size = K ** power
    mult = model.multiplicities(power)
    if model.order == 1:
        matrix = sparse.identity(size, format="csc")
        tags = tuple((0, 0, j) for j in range(size))
        return SymmetryAdaptedBasis(model, power, matrix, tags)

    maps = pattern_maps(model.name, power)
    canon = maps.min(axis=0)
    reps = np.unique(canon)

    n_irreps = model.n_irreps
    dims = model.dims
    # per (t, r): lists of (global row indices, values) per accepted vector
    collected: list[list[list[tuple[np.ndarray, np.ndarray]]]] = [
        [[] for _ in range(dims[t])] for t in range(n_irreps)]

    coeffs = [ir.matrices[:, :, 0] for ir in model.irreps]  # (|G|, d_t)

    for rep in reps:
        members = np.unique(maps[:, rep])
        m_size = len(members)
        local_maps = np.empty((model.order, m_size), dtype=np.int64)
        for e in range(model.order):
            local_maps[e] = np.searchsorted(members, maps[e, members])
        for t in range(n_irreps):
            d = dims[t]
            scale = d / model.order
            e_ops = np.zeros((d, m_size, m_size))
            for e in range(model.order):
                np.add.at(e_ops, (slice(None), local_maps[e], np.arange(m_size)),
                          scale * coeffs[t][e][:, None])
            accepted: list[np.ndarray] = []
            for seed in range(m_size):
                w = e_ops[0, :, seed].copy()
                for _ in range(2):
                    for v in accepted:
                        w -= (v @ w) * v
                norm = np.linalg.norm(w)
                if norm > 1e-6:
                    accepted.append(w / norm)
            for v1 in accepted:
                collected[t][0].append((members, v1))
                for r in range(1, d):
                    vr = e_ops[r] @ v1
                    vr /= np.linalg.norm(vr)
                    collected[t][r].append((members, vr))

    for t in range(n_irreps):
        if len(collected[t][0]) != mult[t]:
            raise AssertionError(
                f"{model.name}: projector image rank {len(collected[t][0])} "
                f"!= multiplicity {mult[t]} for irrep {model.irreps[t].name}")

    rows, data, indptr, tags = [], [], [0], []
    for t in range(n_irreps):
        for r in range(dims[t]):
            for j, (members, vec) in enumerate(collected[t][r]):
                keep = np.abs(vec) > 1e-14
                rows.append(members[keep])
                data.append(vec[keep])
                indptr.append(indptr[-1] + int(keep.sum()))
                tags.append((t, r, j))
    matrix = sparse.csc_matrix(
        (np.concatenate(data), np.concatenate(rows), np.array(indptr)),
        shape=(size, size))
    return SymmetryAdaptedBasis(model, power, matrix, tuple(tags))


def expected_rank_vector(model: EquivariantModel, tree: TreeTopology,
                         split: Bipartition) -> MultiplicityVector:
    """The rank ceiling m(min(n1, n2)) a tensor from ``tree`` can attain on
    the thin flattening along ``split``."""
    profile = bough_counts(tree, split)
    return model.multiplicities(min(profile.n1, profile.n2))
