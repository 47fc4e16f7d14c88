"""walker-soliton: run scenario files and print a JSON (or text) report.

Exit status: 0 when every check matches its expectation, 1 when any does
not, 2 for unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .expr import ExprError, evaluate_many, to_string
from .grid import GridSpec
from .suite import Context, Scenario, ScenarioError, load_scenario, run_suite

COMMANDS = ("curvature", "soliton", "construct", "suite")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="walker-soliton", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("scenario", type=Path, help="scenario JSON file")
    ap.add_argument("--grid", type=int, metavar="N", help="points per axis on [-1, 1]^4 (overrides the scenario)")
    ap.add_argument("--tol", type=float, metavar="T", help="tolerance for checks without their own")
    ap.add_argument("--seed", type=int, metavar="S", help="seed for randomised checks")
    ap.add_argument("--text", action="store_true", help="human-readable report instead of JSON")
    ap.add_argument("--out", type=Path, metavar="DIR", help="construct: write expressions and sample tables here")
    return ap


def read_scenario(path: Path) -> Scenario:
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return load_scenario(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def constructed_outputs(sc: Scenario) -> dict:
    """Expression strings for everything a constructor block builds."""
    ctx = Context(sc)
    out = {}
    for key, val in ctx.cons.items():
        if key == "metric":
            out.update({f"metric.{k}": to_string(e) for k, e in zip(("f1", "f2", "f3"), val.potentials)})
        elif key in ("f", "A2", "A3", "c", "h", "coef"):
            out[key] = to_string(val)
    return out


def write_tables(sc: Scenario, exprs: dict[str, str], out: Path) -> None:
    from .expr import parse_expr

    out.mkdir(parents=True, exist_ok=True)
    (out / "expressions.json").write_text(json.dumps(exprs, indent=2, sort_keys=True) + "\n")
    pts = sc.grid.points()
    names = sorted(exprs)
    vals = evaluate_many([parse_expr(exprs[n]) for n in names], pts, sc.params)
    with open(out / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u", "v", *names])
        for i, p in enumerate(pts):
            w.writerow([f"{c:.6g}" for c in p] + [f"{v:.12e}" for v in vals[:, i]])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = read_scenario(args.scenario)
        if args.grid is not None:
            if args.grid < 2:
                raise ScenarioError("--grid needs at least 2 points per axis")
            sc.grid = GridSpec.uniform(n=args.grid)
        if args.seed is not None:
            sc.seed = args.seed
        if args.command == "construct" and sc.constructor is None:
            raise ScenarioError(f"{args.scenario}: construct needs a 'constructor' block")
        report = run_suite(sc, args.command, args.tol)
        if args.command == "construct":
            exprs = constructed_outputs(sc)
            report.info["expressions"] = exprs
            if args.out is not None:
                write_tables(sc, exprs, args.out)
    except (ScenarioError, ExprError) as exc:
        print(f"walker-soliton: error: {exc}", file=sys.stderr)
        return 2
    print(report.to_text() if args.text else report.to_json())
    return 0 if report.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
