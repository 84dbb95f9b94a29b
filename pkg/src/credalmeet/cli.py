"""Command-line interface.

Subcommands: ``validate``, ``classify``, ``hit``, ``meet``, ``simulate`` and
``selfcheck``. Every command prints a human-readable table and optionally
writes a JSON result file via ``--json``. Exit status: 0 success, 1 invalid
model, 2 solver did not converge, 3 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from .core import CredalMatrix, ModelValidationError, validate
from .chain import TransitionMatrix, simulate_hitting
from .solver import policy_iteration, value_iteration
from .meeting import meet
from .modelio import ModelFormatError, encode_value, load_model, model_digest, write_result
from .selfcheck import bundled_model_path, run_selfcheck

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_CONVERGENCE = 2
EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.12g}"


def _resolve_path(model_arg: str) -> str:
    if model_arg.startswith("builtin:"):
        return bundled_model_path(model_arg.split(":", 1)[1])
    return model_arg


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(model_arg: str) -> CredalMatrix:
    path = _resolve_path(model_arg)
    if not Path(path).exists():
        raise SystemExit(_fail(f"model file not found: {path}", EXIT_USAGE))
    return load_model(path)


def _targets(model: CredalMatrix, raw: str) -> list[int]:
    labels = [s.strip() for s in raw.split(",") if s.strip()]
    if not labels:
        raise ValueError("the target list is empty")
    return model.space.indices(labels)


def _classification_labels(model_labels, classification) -> dict:
    name = lambda ids: [model_labels[i] for i in sorted(ids)]
    return {
        "sense": classification.sense,
        "target": name(classification.target),
        "absorbing": name(classification.absorbing),
        "unsafe": name(classification.unsafe),
        "finite": name(classification.finite),
    }


def _print_classification(sets: dict) -> None:
    print(f"sense:     {sets['sense']}")
    for key in ("target", "absorbing", "unsafe", "finite"):
        print(f"{key + ':':<10} {', '.join(sets[key]) if sets[key] else '(none)'}")


def _model_info(model_arg: str, model: CredalMatrix) -> dict:
    return {
        "path": _resolve_path(model_arg),
        "digest": model_digest(model),
        "states": list(model.space.labels),
    }


def _cmd_validate(args) -> int:
    path = _resolve_path(args.model)
    if not Path(path).exists():
        return _fail(f"model file not found: {path}", EXIT_USAGE)
    try:
        model = load_model(path)
        violations: list[str] = []
    except (ModelFormatError, ModelValidationError) as exc:
        violations = getattr(exc, "violations", None) or [str(exc)]
        model = None
    if args.json:
        payload = {
            "command": "validate",
            "parameters": {"model": path},
            "valid": not violations,
            "violations": violations,
        }
        if model is not None:
            payload["model"] = _model_info(args.model, model)
        write_result(args.json, payload)
    if violations:
        print(f"{path}: INVALID")
        for v in violations:
            print(f"  - {v}")
        return EXIT_INVALID
    print(f"{path}: OK ({model.size} states)")
    return EXIT_OK


def _cmd_classify(args) -> int:
    model = _load(args.model)
    if args.agents is not None:
        # joint classification of the product space, target = the diagonal
        if args.target is not None:
            return _fail("--target cannot be combined with --agents; the joint "
                         "target is the diagonal", EXIT_USAGE)
        from .meeting import JointChoices, build_product_space
        from .reach import classify_view

        product = build_product_space(model.space, args.agents, args.mode)
        view = JointChoices(model, product)
        cls, _ = classify_view(view, product.target_mask(), args.sense)
        labels = tuple(product.label(i) for i in range(product.size))
        target_echo = ["(diagonal)"]
    else:
        if args.target is None:
            return _fail("--target is required unless --agents is given", EXIT_USAGE)
        from .reach import classify

        targets = _targets(model, args.target)
        cls = classify(model, targets, args.sense)
        labels = model.space.labels
        target_echo = sorted(model.space.labels[i] for i in targets)
    sets = _classification_labels(labels, cls)
    _print_classification(sets)
    if args.json:
        write_result(args.json, {
            "command": "classify",
            "parameters": {"target": target_echo, "sense": args.sense,
                           "agents": args.agents, "mode": args.mode},
            "model": _model_info(args.model, model),
            "classification": sets,
        })
    return EXIT_OK


def _cmd_hit(args) -> int:
    model = _load(args.model)
    targets = _targets(model, args.target)
    solve = policy_iteration if args.method == "policy" else value_iteration
    result = solve(model, targets, args.sense, tol=args.tol, max_iter=args.max_iter)
    labels = model.space.labels
    print(f"{args.sense} expected hitting times of {{{', '.join(labels[i] for i in targets)}}}")
    print(f"{'state':<12}{'value':>16}  vertex")
    for i, lab in enumerate(labels):
        print(f"{lab:<12}{_fmt(result.values[i]):>16}  {int(result.selection[i])}")
    print(f"method {result.method}, {result.iterations} iterations, "
          f"residual {result.residual:.3e}, converged {result.converged}")
    if args.json:
        write_result(args.json, {
            "command": "hit",
            "parameters": {
                "target": sorted(labels[i] for i in targets),
                "sense": args.sense, "method": args.method,
                "tol": args.tol, "max_iter": args.max_iter,
            },
            "model": _model_info(args.model, model),
            "values": {lab: encode_value(result.values[i]) for i, lab in enumerate(labels)},
            "selection": {lab: int(result.selection[i]) for i, lab in enumerate(labels)},
            "classification": _classification_labels(labels, result.classification),
            "diagnostics": {
                "method": result.method,
                "iterations": result.iterations,
                "residual": result.residual,
                "converged": result.converged,
            },
        })
    if not result.converged:
        return _fail(f"solver did not converge within {args.max_iter} iterations", EXIT_NO_CONVERGENCE)
    return EXIT_OK


def _read_selection(model: CredalMatrix, path: str | None):
    if path is None:
        return None
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ValueError(f"cannot read selection file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("the selection file must map joint states to vertex indices")
    selection = {}
    for key, tup in doc.items():
        joint = tuple(model.space.index(lab.strip()) for lab in str(key).split(","))
        if not isinstance(tup, list):
            raise ValueError(f"selection for {key!r} must be a list of vertex indices")
        selection[joint] = tuple(int(c) for c in tup)
    return selection


def _cmd_meet(args) -> int:
    model = _load(args.model)
    selection = _read_selection(model, args.selection)
    result = meet(
        model,
        agents=args.agents,
        belief=args.belief,
        sense=args.sense,
        mode=args.mode,
        selection=selection,
        epsilon=args.epsilon,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    product = result.product
    head = f"{args.belief} expected meeting times, {args.agents} agents, {args.mode} mode"
    if result.sense:
        head += f", {result.sense} bound"
    if result.epsilon is not None:
        head += f", epsilon {result.epsilon}"
    print(head)
    labels = model.space.labels
    if args.agents == 2:
        matrix = result.matrix()
        cells = [[_fmt(matrix[x, y]) for y in range(len(labels))] for x in range(len(labels))]
        width = 2 + max(
            max(len(s) for s in labels),
            max(len(c) for row in cells for c in row),
        )
        left = 2 + max(len(s) for s in labels)
        print(" " * left + "".join(f"{s:>{width}}" for s in labels))
        for x, lab in enumerate(labels):
            print(f"{lab:<{left}}" + "".join(f"{c:>{width}}" for c in cells[x]))
    else:
        print(f"{'state':<20}{'value':>16}")
        for i in range(product.size):
            print(f"{product.label(i):<20}{_fmt(result.values[i]):>16}")
    print(f"{result.iterations} iterations, residual {result.residual:.3e}, "
          f"converged {result.converged}")
    if args.json:
        selections = {
            product.label(i): list(result.selections[i])
            for i in range(product.size)
            if result.selections[i] is not None
        }
        product_labels = tuple(product.label(i) for i in range(product.size))
        write_result(args.json, {
            "command": "meet",
            "parameters": {
                "agents": args.agents, "belief": args.belief,
                "sense": result.sense, "mode": args.mode,
                "epsilon": result.epsilon, "tol": args.tol, "max_iter": args.max_iter,
            },
            "model": _model_info(args.model, model),
            "values": {product.label(i): encode_value(result.values[i])
                       for i in range(product.size)},
            "selections": selections,
            "classification": _classification_labels(product_labels, result.classification),
            "diagnostics": {
                "iterations": result.iterations,
                "residual": result.residual,
                "converged": result.converged,
            },
        })
    if not result.converged:
        return _fail(f"solver did not converge within {args.max_iter} sweeps", EXIT_NO_CONVERGENCE)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    model = _load(args.model)
    precise = []
    for i in range(model.size):
        if model.vertex_count(i) != 1:
            return _fail(
                f"simulation needs a precise model; row {model.space.labels[i]!r} "
                f"has {model.vertex_count(i)} vertices", EXIT_USAGE,
            )
        precise.append(model.vertices(i)[0])
    matrix = TransitionMatrix(model.space, np.stack(precise))
    targets = _targets(model, args.target)
    start = model.space.index(args.start)
    summary = simulate_hitting(
        matrix, targets, start,
        trials=args.trials, horizon=args.horizon, seed=args.seed,
    )
    print(f"simulated {summary.trials} paths from {args.start!r} "
          f"(horizon {args.horizon}, seed {args.seed})")
    mean = "n/a" if summary.mean is None else f"{summary.mean:.6f}"
    var = "n/a" if summary.variance is None else f"{summary.variance:.6f}"
    print(f"uncensored {summary.uncensored}, censored {summary.censored}")
    print(f"mean {mean}, variance {var}")
    if args.json:
        write_result(args.json, {
            "command": "simulate",
            "parameters": {
                "target": sorted(model.space.labels[i] for i in targets),
                "start": args.start, "trials": args.trials,
                "horizon": args.horizon, "seed": args.seed,
            },
            "model": _model_info(args.model, model),
            "result": {
                "mean": summary.mean, "variance": summary.variance,
                "censored": summary.censored, "uncensored": summary.uncensored,
                "trials": summary.trials,
            },
        })
    return EXIT_OK


def _cmd_selfcheck(args) -> int:
    ok = run_selfcheck()
    if args.json:
        write_result(args.json, {"command": "selfcheck", "passed": ok})
    return EXIT_OK if ok else EXIT_INVALID


def _build_parser() -> _Parser:
    parser = _Parser(prog="credalmeet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, helptext, with_model=True):
        p = sub.add_parser(name, help=helptext)
        if with_model:
            p.add_argument("model", help="model file path, or builtin:five-state")
        p.add_argument("--json", metavar="PATH", help="also write a JSON result file")
        return p

    add("validate", "check a model file and list every violation")

    p = add("classify", "partition the states for a hitting-time bound")
    p.add_argument("--target", help="comma-separated target labels")
    p.add_argument("--sense", choices=("upper", "lower"), required=True)
    p.add_argument("--agents", type=int, default=None,
                   help="classify the joint pair space instead, target = diagonal")
    p.add_argument("--mode", choices=("full", "quotient"), default="quotient")

    p = add("hit", "bound the expected hitting time of a target set")
    p.add_argument("--target", required=True, help="comma-separated target labels")
    p.add_argument("--sense", choices=("upper", "lower"), required=True)
    p.add_argument("--method", choices=("policy", "value"), default="policy")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=None)

    p = add("meet", "bound the expected meeting time of several agents")
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--belief", choices=("degenerate", "vacuous", "mixture"), default="vacuous")
    p.add_argument("--sense", choices=("upper", "lower"), default="upper")
    p.add_argument("--epsilon", type=float, default=None, help="mixture weight in [0, 1]")
    p.add_argument("--selection", metavar="FILE",
                   help="YAML map of joint states ('a,b') to vertex index lists")
    p.add_argument("--mode", choices=("full", "quotient"), default="quotient")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=1000)

    p = add("simulate", "estimate a hitting time of a precise model by simulation")
    p.add_argument("--target", required=True, help="comma-separated target labels")
    p.add_argument("--start", required=True, help="start state label")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)

    add("selfcheck", "run the built-in verification suite", with_model=False)
    return parser


_HANDLERS = {
    "validate": _cmd_validate,
    "classify": _cmd_classify,
    "hit": _cmd_hit,
    "meet": _cmd_meet,
    "simulate": _cmd_simulate,
    "selfcheck": _cmd_selfcheck,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "max_iter", None) is None and args.command == "hit":
        args.max_iter = 1000 if args.method == "policy" else 10_000
    try:
        return _HANDLERS[args.command](args)
    except (ModelFormatError, ModelValidationError) as exc:
        return _fail(str(exc), EXIT_INVALID)
    except (ValueError, KeyError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
