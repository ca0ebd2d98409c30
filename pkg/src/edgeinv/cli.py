"""Command-line interface.

Subcommands: model-info, simulate, score, reconstruct, fit.  Machine output
is JSON on stdout (the per-bipartition report schema for score/reconstruct);
exit status 0 means a confident answer, 2 an answer with warnings, 1 an
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .groups import MODEL_NAMES, EquivariantModel, builtin_model, \
    symmetry_adapted_basis
from .reconstruct import (
    empirical_tensor,
    reconstruct_by_splits,
    reconstruct_exhaustive,
)
from .scores import all_bipartitions, model_fit_score, split_report, split_score
from .simulate import (
    joint_distribution,
    random_presentation,
    sample_alignment,
    read_fasta,
    write_fasta,
)
from .tensors import (
    PatternTensor,
    pattern_string,
    save_tensor,
    tensor_from_json,
    tensor_to_json,
)
from .trees import Bipartition, from_newick


def _model(name: str) -> EquivariantModel:
    return builtin_model(name)


def _render_basis_vector(vec: np.ndarray, power: int) -> str:
    """Exact form when entries are a +-integer pattern over sqrt(norm)."""
    nonzero = vec[np.abs(vec) > 1e-12]
    if nonzero.size == 0:
        return "0"
    scale = np.abs(nonzero).min()
    ints = vec / scale
    rounded = np.rint(ints)
    if np.abs(ints - rounded).max() < 1e-9:
        norm = int(round((rounded ** 2).sum()))
        terms = []
        for idx in np.flatnonzero(rounded):
            coeff = int(rounded[idx])
            label = pattern_string(int(idx), power)
            sign = "+" if coeff > 0 else "-"
            mag = "" if abs(coeff) == 1 else f"{abs(coeff)}*"
            terms.append(f"{sign} {mag}{label}")
        body = " ".join(terms).lstrip("+ ")
        return f"({body}) / sqrt({norm})"
    return "[" + ", ".join(f"{x: .6f}" for x in vec) + "]"


def cmd_model_info(args) -> int:
    model = _model(args.model)
    power = args.power
    print(f"model {model.name}: group order {model.order}, "
          f"{model.n_irreps} irreducible representations")
    labels = model.class_labels
    sizes = model.class_sizes
    header = "  ".join(f"{lab}(x{sz})" for lab, sz in zip(labels, sizes))
    print(f"\ncharacter table over classes: {header}")
    table = model.character_table()
    for t, ir in enumerate(model.irreps):
        row = "  ".join(f"{v:3d}" for v in table[t])
        print(f"  {ir.name:<8} (dim {ir.dim}): {row}")
    chi = "  ".join(f"{v:3d}" for v in model.permutation_character())
    print(f"  {'chi':<8} (states) : {chi}")
    for l in range(1, power + 1):
        m = model.multiplicities(l)
        print(f"\nmultiplicities m({l}) = {m.entries}")
    if args.basis:
        basis = symmetry_adapted_basis(model, power)
        dense = basis.matrix.toarray()
        print(f"\nadapted basis of the {power}-fold state space:")
        for col, (t, r, j) in enumerate(basis.tags):
            name = model.irreps[t].name
            rendered = _render_basis_vector(dense[:, col], power)
            print(f"  [{name} copy {r + 1} vec {j + 1}] {rendered}")
    return 0


def _write_tensor(psi: PatternTensor, out: Optional[str]) -> None:
    if out is None or out == "-":
        print(tensor_to_json(psi))
        return
    path = Path(out)
    if path.suffix == ".json":
        path.write_text(tensor_to_json(psi))
    else:
        save_tensor(psi, path)


def cmd_simulate(args) -> int:
    model = _model(args.model)
    tree, names = from_newick(args.tree)
    pres = random_presentation(model, tree, args.seed,
                               concentration=args.concentration)
    psi = joint_distribution(pres)
    if args.sites is not None:
        taxa = tuple(names[i] for i in range(1, tree.n_leaves + 1))
        alignment = sample_alignment(psi, args.sites, args.seed, taxa=taxa)
        text = write_fasta(alignment)
        if args.out and args.out != "-":
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    else:
        _write_tensor(psi, args.out)
    return 0


def _load_input(path: str, fmt: str, ambiguous: str) -> PatternTensor:
    if path == "-":
        data = sys.stdin.buffer.read()
    else:
        data = Path(path).read_bytes()
    if fmt == "auto":
        if data[:4] == b"EQPT":
            fmt = "tensor"
        elif data.lstrip()[:1] in (b"{",):
            fmt = "json"
        elif data.lstrip()[:1] == b">":
            fmt = "fasta"
        else:
            raise ValueError(f"cannot sniff the format of {path}")
    if fmt == "tensor":
        from .tensors import tensor_from_bytes
        return tensor_from_bytes(data)
    if fmt == "json":
        return tensor_from_json(data.decode())
    if fmt == "fasta":
        alignment = read_fasta(data.decode(), ambiguous=ambiguous)
        return empirical_tensor(alignment, ambiguous=ambiguous)
    raise ValueError(f"unknown input format {fmt!r}")


def cmd_score(args) -> int:
    model = _model(args.model)
    psi = _load_input(args.input, args.format, args.ambiguous)
    average = not args.no_average
    if args.split:
        splits = [Bipartition.parse(args.split, psi.n)]
    else:
        splits = all_bipartitions(psi.n, nontrivial_only=True)
    scores = [split_score(psi, b, model, average=average) for b in splits]
    print(json.dumps(split_report(model, psi.n, scores), indent=2))
    return 0


def cmd_reconstruct(args) -> int:
    model = _model(args.model)
    psi = _load_input(args.input, args.format, args.ambiguous)
    average = not args.no_average
    if args.method == "exhaustive":
        result = reconstruct_exhaustive(psi, model, tol=args.tol,
                                        average=average)
    else:
        result = reconstruct_by_splits(psi, model, tol=args.tol,
                                       average=average)
    print(json.dumps(result.to_report(model, psi.n), indent=2))
    return 0 if result.confident else 2


def cmd_fit(args) -> int:
    psi = _load_input(args.input, args.format, args.ambiguous)
    names = [n.strip().upper() for n in args.models.split(",") if n.strip()]
    scores = {name: model_fit_score(psi, _model(name)) for name in names}
    print(json.dumps({"n": psi.n, "fit_scores": scores}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeinv",
        description="tree topology decisions from site-pattern tensors via "
                    "equivariant flattening ranks")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input_opts(p):
        p.add_argument("--input", required=True,
                       help="tensor container, tensor JSON, or FASTA ('-' "
                            "for stdin)")
        p.add_argument("--format", choices=["auto", "tensor", "json", "fasta"],
                       default="auto")
        p.add_argument("--ambiguous", choices=["error", "drop"],
                       default="error",
                       help="how to treat non-ACGT alignment columns")
        p.add_argument("--no-average", action="store_true",
                       help="skip the group-averaging projection of "
                            "empirical tensors")

    p = sub.add_parser("model-info", help="character table, multiplicities, "
                                          "adapted basis")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--power", type=int, default=2)
    p.add_argument("--basis", action="store_true",
                   help="also print the adapted basis vectors")
    p.set_defaults(func=cmd_model_info)

    p = sub.add_parser("simulate", help="draw parameters, emit a tensor or "
                                        "a FASTA alignment")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    p.add_argument("--tree", required=True, help="newick topology")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sites", type=int, default=None,
                   help="sample an alignment of this many sites instead of "
                        "emitting the tensor")
    p.add_argument("--concentration", type=float, default=10.0)
    p.add_argument("--out", default=None,
                   help="output path; .json for the debug form, anything "
                        "else for the binary container; default stdout JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="score bipartitions of the leaf set")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    add_input_opts(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--split", help='one split, e.g. "1,2|3,4"')
    group.add_argument("--all-splits", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("reconstruct", help="infer the tree topology")
    p.add_argument("--model", required=True, choices=MODEL_NAMES)
    add_input_opts(p)
    p.add_argument("--method", choices=["exhaustive", "splits"],
                   default="exhaustive")
    p.add_argument("--tol", type=float, default=None,
                   help="edge-score tolerance; default is data driven "
                        "(median split score / 100)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("fit", help="linear-invariant model fit scores")
    add_input_opts(p)
    p.add_argument("--models", required=True,
                   help="comma-separated model names")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
