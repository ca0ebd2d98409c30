"""Representation-engine tests.

Character/multiplicity fixtures are the published tables for the five
substitution symmetries; basis fixtures are the explicit Fourier/Hadamard
vectors those tables induce on the one-site state space.
"""

import numpy as np
import pytest

from edgeinv.groups import (
    MODEL_NAMES,
    builtin_model,
    expected_rank_vector,
    group_average,
    invariant_projector,
    multiplicities,
    pattern_maps,
    symmetry_adapted_basis,
)
from edgeinv.trees import Bipartition, TreeTopology

HADAMARD = {
    "Abar": np.array([1.0, 1.0, 1.0, 1.0]),
    "Cbar": np.array([1.0, 1.0, -1.0, -1.0]),
    "Gbar": np.array([1.0, -1.0, 1.0, -1.0]),
    "Tbar": np.array([1.0, -1.0, -1.0, 1.0]),
}


def quartet12() -> TreeTopology:
    return TreeTopology(4, [(1, 5), (2, 5), (5, 6), (3, 6), (4, 6)])


# ---------------------------------------------------------------------------
# Group structure and character tables
# ---------------------------------------------------------------------------

class TestModels:
    @pytest.mark.parametrize("name,order", [
        ("GMM", 1), ("SSM", 2), ("K81", 4), ("K80", 8), ("JC69", 24)])
    def test_group_orders(self, name, order):
        assert builtin_model(name).order == order

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            builtin_model("HKY")

    def test_jc69_charater_row(self):
        m = builtin_model("JC69")
        assert m.dims == (1, 1, 2, 3, 3)
        # fixed-state counts at one representative per class:
        # id, transposition, 3-cycle, 4-cycle, double transposition
        assert m.character_at((0, 1, 2, 3)) == 4
        assert m.character_at((1, 0, 2, 3)) == 2
        assert m.character_at((1, 2, 0, 3)) == 1
        assert m.character_at((1, 2, 3, 0)) == 0
        assert m.character_at((1, 0, 3, 2)) == 0
        assert sorted(m.class_sizes) == [1, 3, 6, 6, 8]

    def test_k81_character_row(self):
        m = builtin_model("K81")
        assert m.dims == (1, 1, 1, 1)
        assert m.permutation_character() == (4, 0, 0, 0)
        assert m.class_sizes == (1, 1, 1, 1)

    def test_k80_chi_cross_check(self):
        # classes come from the group itself; the fixed-state counts at the
        # five textbook representatives are (4, 0, 2, 0, 0)
        m = builtin_model("K80")
        assert m.character_at((0, 1, 2, 3)) == 4   # id
        assert m.character_at((1, 2, 3, 0)) == 0   # (ACGT)
        assert m.character_at((2, 1, 0, 3)) == 2   # (AG)
        assert m.character_at((2, 3, 0, 1)) == 0   # (AG)(CT)
        assert m.character_at((3, 0, 1, 2)) == 0   # (ATGC)
        assert m.dims == (1, 1, 1, 1, 2)
        assert sorted(m.class_sizes) == [1, 1, 2, 2, 2]

    def test_gmm_trivial(self):
        m = builtin_model("GMM")
        assert m.n_irreps == 1
        assert m.permutation_character() == (4,)

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_character_orthogonality_exact(self, name):
        m = builtin_model(name)
        gram = m.characters @ m.characters.T
        assert np.array_equal(gram, m.order * np.eye(m.n_irreps, dtype=int))

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_dimension_sum(self, name):
        m = builtin_model(name)
        assert sum(d * d for d in m.dims) == m.order

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_permutation_character_is_fixed_count(self, name):
        m = builtin_model(name)
        for i, g in enumerate(m.elements):
            assert m.fixed_counts[i] == sum(1 for x in range(4) if g[x] == x)


# ---------------------------------------------------------------------------
# Multiplicity vectors
# ---------------------------------------------------------------------------

class TestMultiplicities:
    @pytest.mark.parametrize("name,m1,m2", [
        ("GMM", (4,), (16,)),
        ("SSM", (2, 2), (8, 8)),
        ("K81", (1, 1, 1, 1), (4, 4, 4, 4)),
        ("K80", (1, 0, 1, 0, 1), (3, 1, 3, 1, 4)),
        ("JC69", (1, 0, 0, 1, 0), (2, 0, 1, 3, 1)),
    ])
    def test_published_values(self, name, m1, m2):
        model = builtin_model(name)
        assert multiplicities(model, 1).entries == m1
        assert multiplicities(model, 2).entries == m2

    @pytest.mark.parametrize("name,m3", [
        ("GMM", (64,)),
        ("SSM", (32, 32)),
        ("K81", (16, 16, 16, 16)),
        ("K80", (10, 6, 10, 6, 16)),
        ("JC69", (5, 1, 5, 10, 6)),
    ])
    def test_third_power_hand_computed(self, name, m3):
        # worked by hand from the character tables and cubed fixed counts
        assert multiplicities(builtin_model(name), 3).entries == m3

    @pytest.mark.parametrize("name", MODEL_NAMES)
    @pytest.mark.parametrize("power", [1, 2, 3, 4, 5, 6])
    def test_dimension_accounting(self, name, power):
        model = builtin_model(name)
        m = multiplicities(model, power)
        assert sum(d * e for d, e in zip(model.dims, m.entries)) == 4 ** power

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_monotone_in_power(self, name):
        model = builtin_model(name)
        prev = multiplicities(model, 1)
        for power in range(2, 7):
            cur = multiplicities(model, power)
            assert all(a <= b for a, b in zip(prev.entries, cur.entries))
            prev = cur

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_trivial_entry_positive(self, name):
        model = builtin_model(name)
        for power in (1, 2, 3):
            assert multiplicities(model, power).entries[0] >= 1

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            multiplicities(builtin_model("K81"), 13)
        with pytest.raises(ValueError):
            multiplicities(builtin_model("K81"), 0)


# ---------------------------------------------------------------------------
# Symmetry-adapted bases
# ---------------------------------------------------------------------------

def apply_group_element(model, power, element_index, vec):
    maps = pattern_maps(model.name, power)
    out = np.empty_like(vec)
    out[maps[element_index]] = vec
    return out


class TestBases:
    def test_k81_power_one_is_hadamard(self):
        model = builtin_model("K81")
        basis = symmetry_adapted_basis(model, 1).dense()
        for t, name in enumerate(ir.name for ir in model.irreps):
            col = basis[:, t]
            target = HADAMARD[name] / 2.0
            assert np.allclose(col, target) or np.allclose(col, -target)

    def test_ssm_power_one_vectors(self):
        model = builtin_model("SSM")
        b = symmetry_adapted_basis(model, 1)
        dense = b.dense()
        root2 = np.sqrt(2.0)
        u1, u2 = dense[:, list(b.columns(0, 0))].T
        v1, v2 = dense[:, list(b.columns(1, 0))].T
        assert np.allclose(u1, np.array([1, 0, 0, 1]) / root2)
        assert np.allclose(u2, np.array([0, 1, 1, 0]) / root2)
        assert np.allclose(np.abs(v1), np.array([1, 0, 0, 1]) / root2)
        assert np.allclose(np.abs(v2), np.array([0, 1, 1, 0]) / root2)

    @pytest.mark.parametrize("power", [1, 2, 3])
    def test_gmm_is_identity(self, power):
        basis = symmetry_adapted_basis(builtin_model("GMM"), power)
        assert np.allclose(basis.dense(), np.eye(4 ** power))

    @pytest.mark.parametrize("name", MODEL_NAMES)
    @pytest.mark.parametrize("power", [1, 2, 3, 4])
    def test_orthonormal_complete(self, name, power):
        basis = symmetry_adapted_basis(builtin_model(name), power).dense()
        gram = basis.T @ basis
        assert np.abs(gram - np.eye(4 ** power)).max() < 1e-10

    @pytest.mark.parametrize("name", ["SSM", "K81", "K80", "JC69"])
    def test_intertwiner_consistency(self, name):
        # for fixed (t, j) the copies span a G-stable space on which the
        # action matrix reproduces D_t(g) entrywise
        model = builtin_model(name)
        power = 2
        basis = symmetry_adapted_basis(model, power)
        dense = basis.dense()
        mult = model.multiplicities(power)
        for t, d in enumerate(model.dims):
            for j in range(mult[t]):
                copies = np.stack(
                    [dense[:, basis.columns(t, r)[j]] for r in range(d)],
                    axis=1)
                for e in range(model.order):
                    moved = np.stack(
                        [apply_group_element(model, power, e, copies[:, r])
                         for r in range(d)], axis=1)
                    action = copies.T @ moved
                    assert np.abs(action - model.irreps[t].matrices[e]).max() < 1e-10

    def test_column_grouping_matches_multiplicities(self):
        model = builtin_model("JC69")
        basis = symmetry_adapted_basis(model, 2)
        m2 = model.multiplicities(2)
        for t, d in enumerate(model.dims):
            for r in range(d):
                assert len(basis.columns(t, r)) == m2[t]

    def test_deterministic_across_calls(self):
        import edgeinv.groups as G
        model = builtin_model("K80")
        a = symmetry_adapted_basis(model, 2).dense()
        G._BASIS_CACHE.clear()
        b = symmetry_adapted_basis(model, 2).dense()
        assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# Invariant projectors
# ---------------------------------------------------------------------------

class TestInvariantProjector:
    def test_jc69_rank_one_onto_uniform(self):
        proj = invariant_projector(builtin_model("JC69"), 1)
        assert np.allclose(proj, np.full((4, 4), 0.25))
        assert np.linalg.matrix_rank(proj) == 1

    @pytest.mark.parametrize("power", [1, 2])
    def test_gmm_identity(self, power):
        proj = invariant_projector(builtin_model("GMM"), power)
        assert np.allclose(proj, np.eye(4 ** power))

    def test_k81_power_two_rank_four(self):
        proj = invariant_projector(builtin_model("K81"), 2)
        assert np.linalg.matrix_rank(proj) == 4

    @pytest.mark.parametrize("name", MODEL_NAMES)
    @pytest.mark.parametrize("power", [1, 2, 3])
    def test_idempotent_symmetric(self, name, power):
        proj = invariant_projector(builtin_model(name), power)
        assert np.abs(proj @ proj - proj).max() < 1e-12
        assert np.abs(proj - proj.T).max() < 1e-12

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_rank_is_trivial_multiplicity(self, name):
        model = builtin_model(name)
        for power in (1, 2):
            proj = invariant_projector(model, power)
            expected = multiplicities(model, power).entries[0]
            assert np.linalg.matrix_rank(proj, tol=1e-9) == expected

    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_group_average_agrees_with_projector(self, name):
        rng = np.random.default_rng(7)
        model = builtin_model(name)
        vec = rng.normal(size=16)
        proj = invariant_projector(model, 2)
        assert np.allclose(group_average(vec, model, 2), proj @ vec)


# ---------------------------------------------------------------------------
# Expected rank vectors
# ---------------------------------------------------------------------------

class TestExpectedRank:
    def test_k81_on_its_split(self):
        model = builtin_model("K81")
        got = expected_rank_vector(model, quartet12(), Bipartition({1, 2}, 4))
        assert got.entries == (1, 1, 1, 1)

    def test_k81_off_split(self):
        model = builtin_model("K81")
        got = expected_rank_vector(model, quartet12(), Bipartition({1, 3}, 4))
        assert got.entries == (4, 4, 4, 4)

    def test_gmm_off_split(self):
        model = builtin_model("GMM")
        got = expected_rank_vector(model, quartet12(), Bipartition({1, 4}, 4))
        assert got.entries == (16,)
