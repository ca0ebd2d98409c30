"""Equivariant Markov presentations on trees and tensor/alignment simulation.

An evolutionary presentation assigns a 4x4 matrix to every edge; the matrix
must commute with every group element of the model (equivalently, it is
constant on the G-orbits of (row, column) positions, which is exactly the
letter pattern the classical substitution matrices display).  Entries are
indexed A(child_state, parent_state), columns summing to 1 in stochastic
mode, with an explicit root distribution defaulting to uniform.

The leaf joint distribution is computed by post-order message passing:
each vertex carries a table over (joint leaf pattern below it, own state),
so the whole tensor costs O(k^n * n * k) rather than a per-pattern sum over
interior states.  With the uniform root every built-in model makes the
result independent of where the tree was rooted (matrices are transposed
when an edge is traversed against its stored orientation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .groups import EquivariantModel, builtin_model
from .tensors import PatternTensor
from .trees import TreeTopology, from_newick, to_newick

EQUIVARIANCE_TOL = 1e-12
STATES = "ACGT"
STATE_INDEX = {s: i for i, s in enumerate(STATES)}


def position_orbits(model: EquivariantModel) -> tuple[tuple[tuple[int, int], ...], ...]:
    """G-orbits of matrix positions under g.(row, col) = (g row, g col).

    One free parameter per orbit is what equivariance allows, so the classic
    matrix shapes (2 letters for JC69, 3 for K80, 4 for K81, 8 for the strand
    model, 16 for the general model) emerge from the group itself.
    """
    seen: set[tuple[int, int]] = set()
    orbits = []
    for row in range(4):
        for col in range(4):
            if (row, col) in seen:
                continue
            orbit = sorted({(g[row], g[col]) for g in model.elements})
            seen.update(orbit)
            orbits.append(tuple(orbit))
    return tuple(orbits)


def assert_equivariant(matrix: np.ndarray, model: EquivariantModel) -> None:
    for g in model.elements:
        perm = np.array(g)
        rho = np.zeros((4, 4))
        rho[perm, np.arange(4)] = 1.0
        if np.abs(matrix @ rho - rho @ matrix).max() > EQUIVARIANCE_TOL:
            raise ValueError("matrix does not commute with the group action")


@dataclass(frozen=True)
class EvolutionaryPresentation:
    """Edge matrices plus a root distribution on a rooted orientation.

    ``edge_matrices`` is keyed by the directed pair (parent, child) of the
    stored orientation; traversal against it uses the transpose.
    """

    tree: TreeTopology
    root: int
    edge_matrices: Mapping[tuple[int, int], np.ndarray]
    root_distribution: np.ndarray
    model: EquivariantModel
    stochastic: bool = True

    def matrix_for(self, parent: int, child: int) -> np.ndarray:
        stored = self.edge_matrices.get((parent, child))
        if stored is not None:
            return stored
        return self.edge_matrices[(child, parent)].T

    def validate(self) -> None:
        for mat in self.edge_matrices.values():
            assert_equivariant(mat, self.model)
            if self.stochastic:
                if mat.min() < 0 or np.abs(mat.sum(axis=0) - 1.0).max() > 1e-12:
                    raise ValueError("stochastic edge matrix must have "
                                     "non-negative columns summing to 1")
        if self.stochastic:
            pi = self.root_distribution
            if pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-12:
                raise ValueError("root distribution must be a distribution")
            avg = pi[np.array(self.model.elements)].mean(axis=0)
            if np.abs(avg - pi).max() > 1e-12:
                raise ValueError("root distribution must be G-invariant")


def _default_root(tree: TreeTopology) -> int:
    interior = tree.interior_vertices
    return min(interior) if interior else 1


def _oriented_edges(tree: TreeTopology, root: int) -> list[tuple[int, int]]:
    """Edges as (parent, child) pairs, root first, deterministic order."""
    out = []
    stack = [root]
    seen = {root}
    while stack:
        v = stack.pop()
        for w in tree.adjacency[v]:
            if w not in seen:
                seen.add(w)
                out.append((v, w))
                stack.append(w)
    return out


def random_presentation(model: EquivariantModel, tree: TreeTopology,
                        seed: int, concentration: float = 10.0
                        ) -> EvolutionaryPresentation:
    """Draw a stochastic presentation, one free weight per position orbit.

    Diagonal orbits draw from U(1, 2) while off-diagonal orbit weights draw
    from U(0, 1)/concentration, then columns are renormalized; the default
    concentration keeps the matrices diagonally dominant and the simulated
    tensors away from degenerate rank loci.  Deterministic per seed.
    """
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    rng = np.random.default_rng(seed)
    orbits = position_orbits(model)
    matrices = {}
    for edge in _oriented_edges(tree, _default_root(tree)):
        mat = np.zeros((4, 4))
        for orbit in orbits:
            if orbit[0][0] == orbit[0][1]:
                weight = rng.uniform(1.0, 2.0)
            else:
                weight = rng.uniform(0.0, 1.0) / concentration
            for row, col in orbit:
                mat[row, col] = weight
        mat /= mat.sum(axis=0, keepdims=True)
        matrices[edge] = mat
    pres = EvolutionaryPresentation(tree, _default_root(tree), matrices,
                                    np.full(4, 0.25), model, stochastic=True)
    pres.validate()
    return pres


def no_mutation_presentation(tree: TreeTopology,
                             model: Optional[EquivariantModel] = None
                             ) -> EvolutionaryPresentation:
    """Identity matrix on every edge, uniform root: all leaves copy the root
    state, so the joint distribution is the diagonal tensor at weight 1/4."""
    model = model or builtin_model("GMM")
    matrices = {edge: np.eye(4)
                for edge in _oriented_edges(tree, _default_root(tree))}
    pres = EvolutionaryPresentation(tree, _default_root(tree), matrices,
                                    np.full(4, 0.25), model, stochastic=True)
    pres.validate()
    return pres


def joint_distribution(pres: EvolutionaryPresentation,
                       root: Optional[int] = None) -> PatternTensor:
    """The joint leaf-state tensor of a presentation.

    ``root`` overrides the presentation's rooting (used to check rooting
    independence); matrices along reversed edges are transposed.
    """
    tree = pres.tree
    if tree.n_leaves == 1:
        return PatternTensor(pres.root_distribution.copy(), (1,),
                             stochastic=pres.stochastic)
    start = pres.root if root is None else root

    def descend(v: int, parent: Optional[int]) -> tuple[np.ndarray, list[int]]:
        """Table over (joint pattern of leaves below v, state at v)."""
        children = [w for w in tree.adjacency[v] if w != parent]
        if not children:  # leaf
            return np.eye(4), [v]
        acc = np.ones((1, 4))
        labels: list[int] = []
        for child in children:
            table, child_labels = descend(child, v)
            through = table @ pres.matrix_for(v, child)
            acc = np.einsum("pk,qk->pqk", acc,
                            through).reshape(-1, 4)
            labels.extend(child_labels)
        return acc, labels

    table, labels = descend(start, None)
    if start <= tree.n_leaves:
        # rooted at a leaf: its own state is the root state, so the state
        # axis becomes that leaf's pattern axis instead of being summed out
        values = (table * pres.root_distribution[None, :]).reshape(-1)
        labels = labels + [start]
    else:
        values = table @ pres.root_distribution
    tensor = PatternTensor(values, tuple(labels), stochastic=False)
    tensor = tensor.with_canonical_labels()
    if pres.stochastic:
        tensor = PatternTensor(tensor.values, tensor.labels, stochastic=True)
    return tensor


# ---------------------------------------------------------------------------
# Alignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alignment:
    """Site-pattern counts over named taxa (column order is immaterial)."""

    taxa: tuple[str, ...]
    counts: Mapping[str, int]

    def __post_init__(self):
        n = len(self.taxa)
        for pattern, count in self.counts.items():
            if len(pattern) != n:
                raise ValueError(f"pattern {pattern!r} is not length {n}")
            if count <= 0:
                raise ValueError("pattern counts must be positive")
        object.__setattr__(self, "counts", dict(self.counts))

    @property
    def n_taxa(self) -> int:
        return len(self.taxa)

    @property
    def n_sites(self) -> int:
        return sum(self.counts.values())


def default_taxa(n: int) -> tuple[str, ...]:
    return tuple(f"t{i}" for i in range(1, n + 1))


def sample_alignment(psi: PatternTensor, sites: int, seed: int,
                     taxa: Optional[Iterable[str]] = None) -> Alignment:
    """Multinomial sample of i.i.d. site patterns from a stochastic tensor."""
    if not psi.stochastic:
        raise ValueError("sampling requires a stochastic tensor")
    if sites < 0:
        raise ValueError("site count must be non-negative")
    taxa = tuple(taxa) if taxa is not None else default_taxa(psi.n)
    if len(taxa) != psi.n:
        raise ValueError("taxa count must match the tensor")
    if sites == 0:
        return Alignment(taxa, {})
    rng = np.random.default_rng(seed)
    probs = np.clip(psi.values, 0.0, None)
    probs = probs / probs.sum()
    draws = rng.multinomial(sites, probs)
    counts = {}
    for idx in np.flatnonzero(draws):
        pattern = _index_to_pattern(int(idx), psi.n)
        counts[pattern] = int(draws[idx])
    return Alignment(taxa, counts)


def _index_to_pattern(index: int, n: int) -> str:
    out = []
    for _ in range(n):
        out.append(STATES[index % 4])
        index //= 4
    return "".join(reversed(out))


# ---------------------------------------------------------------------------
# FASTA
# ---------------------------------------------------------------------------

def read_fasta(text: str, ambiguous: str = "error") -> Alignment:
    """Parse FASTA records into pattern counts.

    Sequences must have equal lengths.  Columns holding symbols outside
    ACGT are dropped when ``ambiguous="drop"`` and rejected otherwise.
    """
    if ambiguous not in ("error", "drop"):
        raise ValueError("ambiguous must be 'error' or 'drop'")
    taxa: list[str] = []
    seqs: list[str] = []
    current: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            if taxa:
                seqs.append("".join(current))
            taxa.append(line[1:].split()[0])
            current = []
        else:
            if not taxa:
                raise ValueError("sequence data before any FASTA header")
            current.append(line.upper())
    if taxa:
        seqs.append("".join(current))
    if not taxa:
        raise ValueError("empty FASTA input")
    if len(set(len(s) for s in seqs)) != 1:
        raise ValueError("sequences have unequal lengths")
    if len(set(taxa)) != len(taxa):
        raise ValueError("duplicate taxon names")
    length = len(seqs[0])
    if length == 0:
        raise ValueError("alignment has no sites")
    counts: dict[str, int] = {}
    dropped = 0
    for col in range(length):
        pattern = "".join(s[col] for s in seqs)
        if any(ch not in STATE_INDEX for ch in pattern):
            if ambiguous == "drop":
                dropped += 1
                continue
            raise ValueError(f"non-ACGT symbol in column {col + 1}")
    for col in range(length):
        pattern = "".join(s[col] for s in seqs)
        if any(ch not in STATE_INDEX for ch in pattern):
            continue
        counts[pattern] = counts.get(pattern, 0) + 1
    if not counts:
        raise ValueError("no usable columns remain")
    return Alignment(tuple(taxa), counts)


def write_fasta(alignment: Alignment, width: int = 70) -> str:
    """Render an alignment; sites are emitted in sorted pattern order."""
    columns = []
    for pattern in sorted(alignment.counts):
        columns.extend([pattern] * alignment.counts[pattern])
    lines = []
    for row, name in enumerate(alignment.taxa):
        lines.append(f">{name}")
        seq = "".join(col[row] for col in columns)
        for start in range(0, len(seq), width):
            lines.append(seq[start:start + width])
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Presentation serialization
# ---------------------------------------------------------------------------

def presentation_to_json(pres: EvolutionaryPresentation,
                         names: Optional[Mapping[int, str]] = None) -> str:
    return json.dumps({
        "model": pres.model.name,
        "tree": to_newick(pres.tree, names),
        "root": pres.root,
        "stochastic": pres.stochastic,
        "root_distribution": pres.root_distribution.tolist(),
        "edges": [{"parent": u, "child": v, "matrix": m.tolist()}
                  for (u, v), m in sorted(pres.edge_matrices.items())],
    })


def presentation_from_json(text: str) -> EvolutionaryPresentation:
    doc = json.loads(text)
    tree, _ = from_newick(doc["tree"])
    matrices = {(e["parent"], e["child"]): np.array(e["matrix"], dtype=float)
                for e in doc["edges"]}
    pres = EvolutionaryPresentation(
        tree, doc["root"], matrices,
        np.array(doc["root_distribution"], dtype=float),
        builtin_model(doc["model"]), doc.get("stochastic", True))
    pres.validate()
    return pres
