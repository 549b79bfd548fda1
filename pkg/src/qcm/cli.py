"""``qcm`` command-line interface.

Exit codes: 0 when every check passes, 1 on a semantic failure, 2 on I/O
or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from . import io
from .algebra import DecompositionFailed
from .channel import ChoiOperator, InvalidChannelError
from .classical import VariableMismatch, joint_from_cpds, markov_check
from .demos import DEMOS, run_demo
from .model import (
    InvalidInstrument,
    ModelValidationError,
    ZeroProbabilityOutcome,
    bayes_update,
    build_sigma,
    joint_outcome_probabilities,
    measurement,
    validate_model,
)
from .qci import (
    DEFAULT_TOL,
    NotConditionallyIndependent,
    common_cause_dilation,
    conditional_mutual_information,
    find_decomposition,
    multi_find_decomposition,
    multi_qci_check,
    qci_factorization_check,
)
from .report import Report, outcome_key
from .tensor import LabelError

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _validate_channel(rep: Report, ch: ChoiOperator, name: str = "channel"):
    d = ch.defects()
    rep.check(f"{name}: Hermitian", d.hermiticity <= 1e-9, d.hermiticity, 1e-9)
    rep.check(f"{name}: completely positive", d.min_eigenvalue >= -1e-10, d.min_eigenvalue, -1e-10)
    rep.check(f"{name}: trace preserving", d.trace_preservation <= 1e-9, d.trace_preservation, 1e-9)


def cmd_validate(args) -> Report:
    obj = io.read_json(args.file)
    kind = io.file_kind(obj)
    rep = Report(["validate", args.file], details={"kind": kind})
    if kind == "channel":
        _validate_channel(rep, io.channel_from_json(obj, check=False))
    elif kind == "model":
        model, _ = io.model_from_json(obj, check=False)
        report = validate_model(model, args.tol)
        for name, d in report.channel_defects.items():
            rep.check(f"channel {name} valid", d["ok"], d["min_eigenvalue"])
        for (a, b), v in report.commutators.items():
            rep.check(f"[rho_{a}, rho_{b}] = 0", v <= args.tol, v, args.tol)
            rep.residuals[f"commutator {a},{b}"] = v
        if report.passed:
            state = build_sigma(model, tol=args.tol)
            w = np.linalg.eigvalsh(state.sigma.data)
            rep.check("model state positive", w[0] >= -1e-9, w[0])
    else:
        dag, cpds = io.classical_from_json(obj)
        joint = joint_from_cpds(dag, cpds)
        rep.check("joint is Markov for the DAG", markov_check(joint, dag))
        rep.details["nodes"] = list(dag.topological_order())
    return rep


def _load_channel(path: str) -> ChoiOperator:
    obj = io.read_json(path)
    if io.file_kind(obj) != "channel":
        raise io.ParseError(f"{path} does not hold a channel")
    return io.channel_from_json(obj)


def cmd_qci(args) -> Report:
    ch = _load_channel(args.file)
    rep = Report(["qci", args.file, f"--tol={args.tol:g}", f"--mode={args.mode}"])
    modes = ["factorization", "cmi", "decompose"] if args.mode == "all" else [args.mode]
    multi = len(ch.outputs) > 2
    verdicts = {}
    if "factorization" in modes:
        if multi:
            ok, _ = multi_qci_check(ch, args.tol)
            verdicts["factorization"] = ok
        else:
            r = qci_factorization_check(ch, args.tol)
            verdicts["factorization"] = r.passed
            rep.residuals.update(defect=r.defect, commutator=r.commutator)
    if "cmi" in modes:
        if multi:
            cmis = [conditional_mutual_information(ch, [n]) for n in ch.outputs.names]
            rep.details["per_output_cmi"] = cmis
            verdicts["cmi"] = max(cmis) <= args.tol
            rep.residuals["cmi"] = max(cmis)
        else:
            c = conditional_mutual_information(ch)
            verdicts["cmi"] = c <= args.tol
            rep.residuals["cmi"] = c
    if "decompose" in modes:
        try:
            if multi:
                md = multi_find_decomposition(ch, args.tol, seed=args.seed)
                rep.blocks = [list(b) for b in md.blocks]
                rep.residuals["reconstruction"] = md.residual
            else:
                w = find_decomposition(ch, args.tol, seed=args.seed, check_cmi=False)
                rep.blocks = [list(b) for b in w.blocks]
                rep.residuals["reconstruction"] = w.residual
            verdicts["decompose"] = True
        except (DecompositionFailed, NotConditionallyIndependent) as err:
            verdicts["decompose"] = False
            rep.details["decompose_error"] = str(err)
    rep.details["verdicts"] = verdicts
    for mode, v in verdicts.items():
        rep.check(f"{mode}: outputs independent given the input", v)
    if len(set(verdicts.values())) > 1:
        rep.details["warning"] = "predicates disagree"
    return rep


def cmd_decompose(args) -> Report:
    ch = _load_channel(args.file)
    rep = Report(["decompose", args.file], seed=args.seed)
    try:
        if len(ch.outputs) > 2:
            md = multi_find_decomposition(ch, args.tol, seed=args.seed)
            rep.blocks = [list(b) for b in md.blocks]
            rep.residuals["reconstruction"] = md.residual
        else:
            w = find_decomposition(ch, args.tol, seed=args.seed)
            rep.blocks = [list(b) for b in w.blocks]
            rep.residuals["reconstruction"] = w.residual
            rep.details["basis"] = io.encode_matrix(w.decomposition.basis)
        rep.check("decomposition found", True, rep.residuals["reconstruction"], args.tol)
    except (DecompositionFailed, NotConditionallyIndependent) as err:
        rep.check("decomposition found", False)
        rep.details["error"] = str(err)
    return rep


def cmd_dilate(args) -> Report:
    ch = _load_channel(args.file)
    rep = Report(["dilate", args.file], seed=args.seed)
    try:
        d = common_cause_dilation(ch, args.tol, seed=args.seed)
    except (DecompositionFailed, NotConditionallyIndependent) as err:
        rep.check("common-cause dilation exists", False)
        rep.details["error"] = str(err)
        return rep
    rep.check("unitary", d.unitarity_defect <= 1e-10, d.unitarity_defect, 1e-10)
    for k, v in d.no_influence.items():
        rep.check(f"no influence {k}", v <= args.tol, v, args.tol)
    rep.check("reproduces the channel", d.reproduction_residual <= args.tol, d.reproduction_residual, args.tol)
    rep.residuals.update(d.no_influence)
    rep.residuals.update(reproduction=d.reproduction_residual, commutator=d.commutator)
    rep.blocks = [list(b) for b in d.witness.blocks]
    rep.details["dims"] = dict(zip(d.u.inputs.names, d.u.inputs.dims)) | dict(zip(d.u.outputs.names, d.u.outputs.dims))
    return rep


def _load_model(path: str):
    obj = io.read_json(path)
    if io.file_kind(obj) != "model":
        raise io.ParseError(f"{path} does not hold a model")
    return io.model_from_json(obj)


def cmd_probs(args) -> Report:
    model, instruments = _load_model(args.model)
    plan = io.plan_from_json(io.read_json(args.plan), model) if args.plan else instruments
    rep = Report(["probs", args.model] + (["--plan", args.plan] if args.plan else []))
    dist = joint_outcome_probabilities(model, plan)
    rep.probabilities = {outcome_key(k): v for k, v in dist.probabilities.items()}
    total = sum(dist.probabilities.values())
    rep.details["nodes"] = list(dist.nodes)
    rep.details["clamped"] = dist.clamped
    rep.check("normalized", abs(total - 1) <= 1e-9, total)
    return rep


def cmd_update(args) -> Report:
    model, instruments = _load_model(args.model)
    try:
        node, outcome = args.observed.split("=", 1)
    except ValueError:
        raise io.ParseError("--observed must look like NODE=OUTCOME") from None
    parents = {n.name: model.dag.parents(n.name) for n in model.nodes}
    roots = [n for n, p in parents.items() if not p]
    others = [n for n in parents if n != node and n not in roots]
    if len(roots) != 1 or len(others) != 1 or parents.get(node) != (roots[0],) or parents[others[0]] != (roots[0],):
        raise ModelValidationError("update needs a fork A -> B, A -> C with the observation at a leaf")
    root, target = roots[0], others[0]
    dims = {n.name: n.dim for n in model.nodes}
    ib = instruments.get(node) or measurement(node, dims[node])
    ic = instruments.get(target) or measurement(target, dims[target])
    rep = Report(["update", args.model, f"--observed={args.observed}"])
    res = bayes_update(model, outcome, ib, ic, node_a=root, node_b=node, node_c=target)
    dist = joint_outcome_probabilities(model, {node: ib, target: ic})
    worst = 0.0
    for kc, p in res.predict.items():
        rep.probabilities[kc] = p
        ratio = dist.probabilities[(outcome, kc) if dist.nodes[0] == node else (kc, outcome)] / res.probability
        worst = max(worst, abs(p - ratio))
    rep.details.update(observed=node, outcome=outcome, predicted=target, probability=res.probability)
    rep.check("prediction matches the conditional of the joint", worst <= 1e-10, worst, 1e-10)
    return rep


def cmd_demo(args) -> Report:
    return run_demo(args.name, args.seed)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="emit the machine-readable report")
    parser = argparse.ArgumentParser(prog="qcm", description="Quantum causal model toolkit.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a channel, model or classical model file")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("qci", parents=[common], help="test conditional independence of channel outputs")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--mode", choices=["factorization", "cmi", "decompose", "all"], default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_qci)

    for name, func, helptext in (
        ("decompose", cmd_decompose, "find the direct-sum-of-tensor-products decomposition"),
        ("dilate", cmd_dilate, "build a unitary dilation with one private ancilla per output"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("file")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("probs", parents=[common], help="outcome probabilities for an intervention plan")
    p.add_argument("model")
    p.add_argument("--plan", help="instrument file; defaults to the model's own instruments")
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("update", parents=[common], help="Bayesian update on a fork model")
    p.add_argument("model")
    p.add_argument("--observed", required=True, metavar="NODE=OUTCOME")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("demo", parents=[common], help="run a built-in worked example")
    p.add_argument("name", choices=sorted(DEMOS))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo)
    return parser


SEMANTIC_ERRORS = (
    ModelValidationError,
    InvalidInstrument,
    InvalidChannelError,
    ZeroProbabilityOutcome,
    DecompositionFailed,
    NotConditionallyIndependent,
    LabelError,
    VariableMismatch,
)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    as_json = getattr(args, "json", False)
    try:
        rep = args.func(args)
    except io.ParseError as err:
        print(f"qcm: {err}", file=sys.stderr)
        return EXIT_IO
    except SEMANTIC_ERRORS as err:
        rep = Report([args.command], details={"error": str(err)})
        rep.check(type(err).__name__, False)
    except ValueError as err:
        # shape or normalization problems surfaced while parsing a file
        print(f"qcm: {err}", file=sys.stderr)
        return EXIT_IO
    print(rep.to_json() if as_json else rep.render())
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
