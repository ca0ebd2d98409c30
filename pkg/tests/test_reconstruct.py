"""Reconstruction pipeline tests: exhaustive scan, split selection,
empirical tensors, and diagnostic behavior on degenerate inputs."""

import numpy as np
import pytest

from edgeinv.groups import builtin_model
from edgeinv.reconstruct import (
    WARN_NO_UNIQUE_PASS,
    WARN_TIE,
    data_driven_tol,
    empirical_tensor,
    reconstruct_by_splits,
    reconstruct_exhaustive,
)
from edgeinv.simulate import (
    Alignment,
    joint_distribution,
    no_mutation_presentation,
    random_presentation,
    read_fasta,
    sample_alignment,
    write_fasta,
)
from edgeinv.tensors import PatternTensor, permute_labels
from edgeinv.trees import (
    Bipartition,
    TreeTopology,
    enumerate_trivalent_topologies,
    tree_from_splits,
)

MODELS = ["GMM", "SSM", "K81", "K80", "JC69"]


def quartet(partner: int) -> TreeTopology:
    others = sorted({2, 3, 4} - {partner})
    return TreeTopology(4, [(1, 5), (partner, 5), (5, 6),
                            (others[0], 6), (others[1], 6)])


def caterpillar6() -> TreeTopology:
    return TreeTopology(6, [(1, 7), (2, 7), (7, 8), (3, 8), (8, 9),
                            (4, 9), (9, 10), (5, 10), (6, 10)])


def relabeled_tree(tree: TreeTopology, mapping: dict[int, int]) -> TreeTopology:
    n = tree.n_leaves
    splits = [Bipartition({mapping.get(x, x) for x in s.side}, n)
              for s in tree.interior_splits()]
    return tree_from_splits(splits, n)


# ---------------------------------------------------------------------------
# Exhaustive scan
# ---------------------------------------------------------------------------

class TestExhaustive:
    @pytest.mark.parametrize("name", MODELS)
    @pytest.mark.parametrize("seed", range(3))
    def test_exact_tensor_unique_pass(self, name, seed):
        model = builtin_model(name)
        psi = joint_distribution(random_presentation(model, quartet(2), seed))
        result = reconstruct_exhaustive(psi, model)
        assert result.tree == quartet(2)
        assert result.confident
        assert sum(c.passed for c in result.candidates) == 1

    @pytest.mark.parametrize("partner", [2, 3, 4])
    def test_every_quartet_topology_recoverable(self, partner):
        model = builtin_model("K81")
        psi = joint_distribution(random_presentation(model, quartet(partner),
                                                     123))
        assert reconstruct_exhaustive(psi, model).tree == quartet(partner)

    def test_no_mutation_passes_everything(self):
        psi = joint_distribution(no_mutation_presentation(quartet(2)))
        result = reconstruct_exhaustive(psi, builtin_model("K81"))
        assert all(c.passed for c in result.candidates)
        assert WARN_NO_UNIQUE_PASS in result.warnings
        assert WARN_TIE in result.warnings
        assert not result.confident

    @pytest.mark.parametrize("seed", range(3))
    def test_sampled_alignment_recovers_by_min_score(self, seed):
        model = builtin_model("K81")
        psi = joint_distribution(random_presentation(model, quartet(2), seed))
        aln = sample_alignment(psi, 10 ** 5, seed=seed + 1000)
        emp = empirical_tensor(aln)
        result = reconstruct_exhaustive(emp, model, tol=None)
        assert result.tree == quartet(2)

    def test_five_leaf_exact(self):
        model = builtin_model("JC69")
        tree = enumerate_trivalent_topologies(5)[7]
        psi = joint_distribution(random_presentation(model, tree, 5))
        assert reconstruct_exhaustive(psi, model).tree == tree

    def test_genericity_audit_flags_no_mutation(self):
        psi = joint_distribution(no_mutation_presentation(quartet(2)))
        result = reconstruct_exhaustive(psi, builtin_model("GMM"))
        assert result.genericity_warnings

    def test_leaf_guard(self):
        psi = PatternTensor(np.zeros(4 ** 9), tuple(range(1, 10)))
        with pytest.raises(ValueError):
            reconstruct_exhaustive(psi, builtin_model("GMM"))

    @pytest.mark.parametrize("seed", range(2))
    def test_relabel_equivariance(self, seed):
        model = builtin_model("K80")
        psi = joint_distribution(random_presentation(model, quartet(2), seed))
        mapping = {1: 3, 3: 1, 2: 4, 4: 2}
        moved = permute_labels(psi, mapping)
        direct = reconstruct_exhaustive(moved, model).tree
        relabeled = relabeled_tree(reconstruct_exhaustive(psi, model).tree,
                                   mapping)
        assert direct == relabeled


# ---------------------------------------------------------------------------
# Split selection
# ---------------------------------------------------------------------------

class TestBySplits:
    def test_six_leaf_gmm_exact(self):
        model = builtin_model("GMM")
        tree = caterpillar6()
        psi = joint_distribution(random_presentation(model, tree, 77))
        result = reconstruct_by_splits(psi, model)
        assert result.tree == tree
        assert len(result.chosen_splits) == 3
        assert all(s.score <= 1e-8 for s in result.chosen_splits)
        assert not result.warnings

    @pytest.mark.parametrize("name", MODELS)
    def test_agrees_with_exhaustive_on_exact_data(self, name):
        model = builtin_model(name)
        for n, seeds in ((4, 10), (5, 10), (6, 3)):
            topologies = enumerate_trivalent_topologies(n)
            for seed in range(seeds):
                tree = topologies[(seed * 7) % len(topologies)]
                psi = joint_distribution(random_presentation(model, tree,
                                                             seed + 10 * n))
                by_splits = reconstruct_by_splits(psi, model)
                exhaustive = reconstruct_exhaustive(psi, model,
                                                    check_genericity=False)
                assert by_splits.tree == tree
                assert exhaustive.tree == tree

    def test_quartet_reduces_to_argmin(self):
        model = builtin_model("K81")
        psi = joint_distribution(random_presentation(model, quartet(3), 9))
        result = reconstruct_by_splits(psi, model)
        assert result.tree == quartet(3)
        assert len(result.chosen_splits) == 1
        assert result.chosen_splits[0].split == Bipartition({1, 3}, 4)

    def test_adversarial_mixture_not_silent(self):
        model = builtin_model("GMM")
        a = joint_distribution(random_presentation(model, quartet(2), 1))
        b = joint_distribution(random_presentation(model, quartet(3), 2))
        mixture = PatternTensor((a.values + b.values) / 2.0, a.labels,
                                stochastic=True)
        result = reconstruct_by_splits(mixture, model)
        assert result.warnings  # wrong answers must carry a diagnosis

    def test_leaf_guard(self):
        psi = PatternTensor(np.zeros(4 ** 3), (1, 2, 3))
        with pytest.raises(ValueError):
            reconstruct_by_splits(psi, builtin_model("GMM"))


# ---------------------------------------------------------------------------
# Empirical tensors
# ---------------------------------------------------------------------------

class TestEmpiricalTensor:
    def test_point_mass(self):
        aln = Alignment(("a", "b", "c", "d"), {"AAAA": 1})
        psi = empirical_tensor(aln)
        assert psi.values[0] == 1.0
        assert psi.stochastic

    def test_two_patterns(self):
        aln = Alignment(("a", "b", "c", "d"), {"ACGT": 1, "TGCA": 1})
        psi = empirical_tensor(aln)
        assert sorted(psi.values[psi.values > 0]) == [0.5, 0.5]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_tensor(Alignment(("a", "b"), {}))

    def test_ambiguous_patterns(self):
        aln = Alignment(("a", "b"), {"AC": 3, "AN": 1})
        with pytest.raises(ValueError):
            empirical_tensor(aln)
        psi = empirical_tensor(aln, ambiguous="drop")
        assert psi.values[1] == 1.0

    def test_fasta_fixture_close_to_source(self):
        # frozen fixture: sharply diagonal matrices keep the sampling error
        # of 1000 sites within l1 0.1 (observed 0.068 for this seed pair)
        model = builtin_model("JC69")
        psi = joint_distribution(random_presentation(model, quartet(2), 4,
                                                     concentration=40.0))
        aln = sample_alignment(psi, 1000, seed=1002)
        back = empirical_tensor(read_fasta(write_fasta(aln)))
        assert np.abs(back.values - psi.values).sum() < 0.1

    def test_sampling_error_shrinks_like_root_sites(self):
        # one decade of sites should shrink the l1 gap by about sqrt(10);
        # the frozen seed lands the ratio inside the [0.2, 0.5] band around
        # the predicted 0.316
        model = builtin_model("K81")
        psi = joint_distribution(random_presentation(model, quartet(2), 4))
        gaps = []
        for sites in (10 ** 3, 10 ** 4):
            aln = sample_alignment(psi, sites, seed=5)
            gaps.append(np.abs(empirical_tensor(aln).values
                               - psi.values).sum())
        ratio = gaps[1] / gaps[0]
        assert 0.2 < ratio < 0.5


class TestDataDrivenTol:
    def test_median_rule(self):
        assert data_driven_tol([1.0, 2.0, 3.0]) == pytest.approx(0.02)

    def test_empty_falls_back(self):
        assert data_driven_tol([]) > 0


class TestConsistencyTrend:
    @pytest.mark.parametrize("name", ["K81", "GMM"])
    def test_accuracy_grows_with_sites_in_hard_regime(self, name):
        # near-star trees (interior edge close to identity) keep accuracy
        # off the ceiling at short lengths; frozen seeds make the counts
        # deterministic
        model = builtin_model(name)
        tree = quartet(2)
        accuracies = []
        for sites in (10 ** 2, 10 ** 3, 10 ** 4):
            correct = 0
            for seed in range(40):
                psi = joint_distribution(random_presentation(
                    model, tree, seed, concentration=300.0))
                aln = sample_alignment(psi, sites, seed=seed + 7 * sites)
                res = reconstruct_exhaustive(empirical_tensor(aln), model,
                                             check_genericity=False)
                correct += res.tree == tree
            accuracies.append(correct)
        assert accuracies[0] <= accuracies[1] <= accuracies[2]
        assert accuracies[0] < accuracies[2]  # the regime is genuinely hard
        assert accuracies[2] >= 38
