"""Command line entry point.

Exit codes: 0 ok, 1 validation failure, 2 parse error, 3 internal diagnostic failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import config, registry
from .errors import (ConfigError, DiagnosticError, NumericalError, ReducibleWalkError,
                     StructuralError)
from .model import validate
from .report import analyze, emit_series, initial_state

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_DIAGNOSTIC = 0, 1, 2, 3

log = logging.getLogger("oqrw")


class _ExitError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def load_walk(ref: str, check: bool = True):
    """``builtin:<name>`` or a path to a JSON document."""
    try:
        if ref.startswith("builtin:"):
            walk = registry.builtin(ref[len("builtin:"):])
        else:
            walk = config.load(ref)
    except (ConfigError, StructuralError) as exc:
        raise _ExitError(EXIT_PARSE, f"{ref}: {exc}") from exc
    if check:
        rep = validate(walk)
        if not rep.ok:
            raise _ExitError(EXIT_INVALID, f"{ref}: not stochastic at site {rep.worst_site!r} "
                                           f"(deviation {rep.worst_deviation:.3e})")
    return walk


def _initial(walk, choice):
    if choice is None:
        return initial_state(walk)
    key, _, value = choice.partition("=")
    if key != "site" or not value:
        raise _ExitError(EXIT_PARSE, f"--initial expects site=ID, got {choice!r}")
    try:
        return initial_state(walk, value)
    except StructuralError as exc:
        raise _ExitError(EXIT_PARSE, str(exc)) from exc


def cmd_validate(args):
    walk = load_walk(args.file, check=False)
    rep = validate(walk, args.tol)
    for lab, dev in rep.deviations.items():
        print(f"site {lab}: deviation {dev:.3e}")
    if not rep.ok:
        print(f"FAILED: worst site {rep.worst_site} (deviation {rep.worst_deviation:.3e})")
        return EXIT_INVALID
    print(f"ok: worst deviation {rep.worst_deviation:.3e}")
    return EXIT_OK


def cmd_analyze(args):
    walk = load_walk(args.file)
    rep = analyze(walk, tol=args.tol, seed=args.seed)
    if args.json:
        print(json.dumps(rep.to_json(), indent=1))
    else:
        print("\n".join(rep.lines()))
    return EXIT_OK


def cmd_evolve(args):
    walk = load_walk(args.file)
    rho0 = _initial(walk, args.initial)
    files = emit_series(walk, rho0, args.steps, "cesaro" if args.cesaro else "direct", args.out)
    print("wrote " + ", ".join(files) + f" to {args.out}")
    return EXIT_OK


def cmd_sample(args):
    walk = load_walk(args.file)
    rho0 = _initial(walk, args.initial)
    files = emit_series(walk, rho0, args.steps, "sample", args.out,
                        trajectories=args.trajectories, seed=args.seed)
    print("wrote " + ", ".join(files) + f" to {args.out}")
    return EXIT_OK


def cmd_example(args):
    try:
        walk = registry.builtin(args.name)
    except ConfigError as exc:
        raise _ExitError(EXIT_PARSE, str(exc)) from exc
    text = config.serialize(walk)
    if args.write:
        with open(args.write, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.name} to {args.write}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _nonneg(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oqrw", description="Open quantum random walk toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check the stochasticity condition")
    s.add_argument("file")
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("analyze", help="invariant states, irreducibility, period, decomposition")
    s.add_argument("file", help="JSON file or builtin:NAME")
    s.add_argument("--tol", type=float, default=1e-9, help="rank tolerance")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("evolve", help="write M^n(rho) (or Cesaro means) as CSV")
    s.add_argument("file")
    s.add_argument("--steps", type=_nonneg, required=True)
    s.add_argument("--cesaro", action="store_true")
    s.add_argument("--initial", help="site=ID, pure e_1 at that site")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("sample", help="Monte Carlo trajectories as CSV")
    s.add_argument("file")
    s.add_argument("--steps", type=_nonneg, required=True)
    s.add_argument("--trajectories", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--initial", help="site=ID, pure e_1 at that site")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("example", help="print or write a builtin walk as JSON")
    s.add_argument("name")
    s.add_argument("--write", metavar="FILE")
    s.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _ExitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DiagnosticError, NumericalError, ReducibleWalkError) as exc:
        print(f"diagnostic failure: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
