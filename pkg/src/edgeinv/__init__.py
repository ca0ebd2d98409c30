"""Tree topology decisions from site-pattern tensors via equivariant
flattening ranks: group engine, thin flattenings, split scores, simulation,
and reconstruction."""

from .groups import (
    EquivariantModel,
    MultiplicityVector,
    SymmetryAdaptedBasis,
    builtin_model,
    expected_rank_vector,
    invariant_projector,
    multiplicities,
    symmetry_adapted_basis,
)
from .reconstruct import (
    ReconstructionResult,
    empirical_tensor,
    reconstruct_by_splits,
    reconstruct_exhaustive,
)
from .scores import (
    GeneratorCatalog,
    SplitScore,
    edge_invariant_test,
    evaluate_generators,
    generator_catalog,
    genericity_check,
    model_fit_score,
    split_score,
)
from .simulate import (
    Alignment,
    EvolutionaryPresentation,
    joint_distribution,
    no_mutation_presentation,
    random_presentation,
    read_fasta,
    sample_alignment,
    write_fasta,
)
from .tensors import (
    PatternTensor,
    RankVector,
    ThinFlattening,
    flatten,
    load_tensor,
    save_tensor,
    star_contract,
    thin_flatten,
    thin_rank,
)
from .trees import (
    Bipartition,
    BoughProfile,
    TreeTopology,
    bough_counts,
    edge_splits,
    enumerate_trivalent_topologies,
    from_newick,
    splits_compatible,
    to_newick,
    tree_from_splits,
)

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "Bipartition",
    "BoughProfile",
    "EquivariantModel",
    "EvolutionaryPresentation",
    "GeneratorCatalog",
    "MultiplicityVector",
    "PatternTensor",
    "RankVector",
    "ReconstructionResult",
    "SplitScore",
    "SymmetryAdaptedBasis",
    "ThinFlattening",
    "TreeTopology",
    "bough_counts",
    "builtin_model",
    "edge_invariant_test",
    "edge_splits",
    "empirical_tensor",
    "enumerate_trivalent_topologies",
    "evaluate_generators",
    "expected_rank_vector",
    "flatten",
    "from_newick",
    "generator_catalog",
    "genericity_check",
    "invariant_projector",
    "joint_distribution",
    "load_tensor",
    "model_fit_score",
    "multiplicities",
    "no_mutation_presentation",
    "random_presentation",
    "read_fasta",
    "reconstruct_by_splits",
    "reconstruct_exhaustive",
    "sample_alignment",
    "save_tensor",
    "splits_compatible",
    "split_score",
    "star_contract",
    "symmetry_adapted_basis",
    "thin_flatten",
    "thin_rank",
    "to_newick",
    "tree_from_splits",
    "write_fasta",
]
