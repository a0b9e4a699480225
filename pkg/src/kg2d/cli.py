"""Command line entry point ``kg2d``.

``kg2d <experiment> [--config FILE] [--out DIR]`` runs an experiment and
exits with 0 (all verdicts pass), 1 (a verdict failed), 2 (usage or config
error) or 3 (underresolved or failed run). ``kg2d op ...`` applies a single
operator to a KGF1 snapshot and ``kg2d defaults`` prints every config key.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import DEFAULTS, EXPERIMENTS, ExperimentConfig, from_dict, load_config
from .errors import ConfigError, GridError, SnapshotError


def _vec(text: str) -> list[float]:
    try:
        v = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    return v


def _pair(text: str) -> list[float]:
    v = _vec(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kg2d", description="Klein-Gordon spectral laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="TOML or JSON config (defaults if omitted)")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: runs/<experiment>)")
        if name == "ground-state":
            sp.add_argument("--tol", type=float, help="ODE residual tolerance")
        if name == "bridge":
            sp.add_argument("--lambda-list", type=_vec, help="comma-separated scales, e.g. 4,8,16")
    sub.add_parser("defaults", help="print the default configuration as JSON")

    op = sub.add_parser("op", help="apply one operator to a KGF1 snapshot")
    op.add_argument("name", choices=("boost", "lp", "tube", "propagate"))
    op.add_argument("input", type=Path)
    op.add_argument("output", type=Path)
    op.add_argument("--nu", type=_pair, default=[0.0, 0.0], help="boost parameter nu1,nu2")
    op.add_argument("--direction", choices=("inverse", "forward"), default="inverse")
    op.add_argument("--N", type=int, default=1, help="dyadic level for lp and tube")
    op.add_argument("--k", type=int, default=0, help="sector index for tube")
    op.add_argument("--t", type=float, default=0.0, help="time for propagate")
    op.add_argument("--flow", choices=("kg", "schrodinger"), default="kg")
    return p


def _config_for(args) -> ExperimentConfig:
    over: dict = {"experiment": args.command}
    if getattr(args, "tol", None) is not None:
        over["ground_state"] = {"tol": args.tol}
    if getattr(args, "lambda_list", None):
        over["bridge"] = {"lambdas": args.lambda_list}
    if args.config is None:
        return from_dict(over)
    return load_config(args.config, over)


def _run_op(args) -> int:
    from .io import load_snapshot, save_snapshot
    from .kg import KGState, linear_flow
    from .nls import NLSState
    from .symmetry import (
        TubeIndex,
        boost_data,
        free_propagate_kg,
        free_propagate_schrodinger,
        littlewood_paley,
        tube_projection,
    )

    obj = load_snapshot(args.input)
    if args.name == "boost":
        fn = lambda f: boost_data(np.asarray(args.nu), f, args.direction)  # noqa: E731
    elif args.name == "lp":
        fn = lambda f: littlewood_paley(args.N, f)  # noqa: E731
    elif args.name == "tube":
        idx = TubeIndex(args.N, args.k)
        fn = lambda f: tube_projection(idx, f)  # noqa: E731
    else:
        prop = free_propagate_kg if args.flow == "kg" else free_propagate_schrodinger
        fn = lambda f: prop(args.t, f)  # noqa: E731

    if isinstance(obj, KGState):
        if args.name == "tube":
            raise ValueError("a tube projection of a real state is complex; apply it to a field snapshot")
        if args.name == "propagate":
            out = linear_flow(obj, args.t)
        else:
            # boosts and Littlewood-Paley symbols are Hermitian, so real data stays real
            out = obj.replace(u=fn(obj.u).real(), ut=fn(obj.ut).real())
    elif isinstance(obj, NLSState):
        out = NLSState(fn(obj.w), obj.t, obj.mu)
    else:
        out = fn(obj)
    save_snapshot(out, args.output, {"operator": args.name, "source": str(args.input)})
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "defaults":
        print(json.dumps(DEFAULTS, indent=2))
        return 0
    try:
        if args.command == "op":
            return _run_op(args)
        cfg = _config_for(args)
    except (ConfigError, SnapshotError, GridError, ValueError, OSError) as exc:
        print(f"kg2d: error: {exc}", file=sys.stderr)
        return 2
    from .experiments import run

    out = args.out or Path("runs") / args.command
    report, code = run(cfg, out)
    for v in report.get("verdicts", []):
        print(f"{'PASS' if v['passed'] else 'FAIL'} {v['name']}: {v['value']} (threshold {v['threshold']}; {v['rule']})")
    print(f"status: {report.get('status')} -> {out / 'report.json'}")
    if report.get("message"):
        print(report["message"])
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
