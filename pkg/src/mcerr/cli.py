"""Command-line front end.

    mcerr estimate --input weights.txt
    mcerr converge --dist power:-0.1 --n 10000 --seed 42 --stride 10 --out trace.csv
    mcerr ensemble --dist uniform --n 10 --replicas 1000 --seed 7
    mcerr counterexample --n 4 --b 0.5
    mcerr stability --offset 1e8 --n 100000

Relative output paths are resolved against ``$MCERR_OUTPUT_DIR`` when set.
Exit status is 0 on success and 2 on bad usage or malformed input.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import IO, Iterator

from . import __version__
from .estimators import counterexample, report
from .experiments import loglog_slope, run_convergence, run_ensemble, run_stability
from .moment_core import CentralAccumulator, acc_update
from .sampling import GENERATOR_ID, ConfigError, parse_spec

OUTPUT_DIR_ENV = "MCERR_OUTPUT_DIR"


class InputError(Exception):
    pass


def dumps(obj, indent: str = "  ", _level: int = 0) -> str:
    """JSON with floats written to 17 significant digits."""
    pad = indent * (_level + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        text = format(obj, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + indent * _level + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + indent * _level + "]"
    # numpy scalars and fractions
    return dumps(float(obj), indent, _level)


def output_path(name: str) -> Path:
    path = Path(name)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def read_weights(fh: IO[str]) -> Iterator[float]:
    for lineno, line in enumerate(fh, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            w = float(text)
        except ValueError:
            raise InputError(f"line {lineno}: not a number: {text!r}") from None
        if not math.isfinite(w):
            raise InputError(f"line {lineno}: weight must be finite, got {text!r}")
        yield w


def cmd_estimate(args) -> int:
    acc = CentralAccumulator()
    try:
        if args.input == "-":
            for w in read_weights(sys.stdin):
                acc = acc_update(acc, w)
        else:
            with open(args.input, encoding="utf-8") as fh:
                for w in read_weights(fh):
                    acc = acc_update(acc, w)
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    if acc.n == 0:
        raise InputError("no weights in input")
    print(dumps(report(acc).as_dict()))
    return 0


def _require_n(n: int, what: str = "--n") -> None:
    if n < 4:
        raise InputError(f"{what} must be at least 4, got {n}")


def cmd_converge(args) -> int:
    _require_n(args.n)
    if args.stride < 1:
        raise InputError(f"--stride must be positive, got {args.stride}")
    trace = run_convergence(args.dist, args.n, args.seed, args.stride)
    if args.format == "json":
        body = dumps({
            "spec": str(args.dist), "seed": args.seed, "stride": args.stride,
            "generator": GENERATOR_ID, "version": __version__,
            "n": trace.n.tolist(), "e1": trace.e1.tolist(), "e2": trace.e2.tolist(),
            "e4hat": trace.e4hat.tolist(), "err1": trace.err1.tolist(), "err2": trace.err2.tolist(),
        }) + "\n"
        if args.out:
            output_path(args.out).write_text(body)
        else:
            sys.stdout.write(body)
        return 0
    if not args.out:
        trace.write_csv(sys.stdout)
        return 0
    with open(output_path(args.out), "w", newline="") as fh:
        trace.write_csv(fh)
    in_top_decade = int((trace.n >= trace.n.max() / 10).sum())
    summary = {"spec": str(args.dist), "seed": args.seed, "rows": len(trace.n)}
    if in_top_decade >= 2:
        summary["slope_e2"] = loglog_slope(trace.n, trace.e2)
        summary["slope_e4hat"] = loglog_slope(trace.n, trace.e4hat)
    print(dumps(summary))
    return 0


def cmd_ensemble(args) -> int:
    _require_n(args.n)
    if args.replicas < 100:
        raise InputError(f"--replicas must be at least 100, got {args.replicas}")
    if args.bins < 1 or args.workers < 1:
        raise InputError("--bins and --workers must be positive")
    res = run_ensemble(args.dist, args.n, args.replicas, args.seed, args.bins, workers=args.workers)
    meta = {"spec": args.dist, "seed": args.seed, "n": args.n, "replicas": args.replicas}
    for name, hist in (("e1", res.hist_e1), ("e2", res.hist_e2)):
        with open(output_path(f"{args.out}_{name}.csv"), "w", newline="") as fh:
            hist.write_csv(fh, estimator=name, **meta)
    body = dumps(res.summary())
    output_path(f"{args.out}_summary.json").write_text(body + "\n")
    print(body)
    return 0


def cmd_counterexample(args) -> int:
    _require_n(args.n)
    if not 0 <= args.b <= 1:
        raise InputError(f"--b must lie in [0, 1], got {args.b}")
    ce = counterexample(args.n, args.b)
    print(dumps({
        "n": args.n,
        "b": args.b,
        "ones": sum(ce.weights),
        "a": float(ce.a),
        "threshold": float(ce.threshold),
        "e4": float(ce.e4),
        "e4_hat": float(ce.e4_hat),
        "negative": ce.e4 < 0,
        "predicted_negative": ce.predicted_negative,
    }))
    return 0


def cmd_stability(args) -> int:
    _require_n(args.n)
    print(dumps(run_stability(args.offset, args.n, args.seed).as_dict()))
    return 0


def _dist(text: str):
    try:
        return parse_spec(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcerr", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"mcerr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate and errors for a file of weights")
    p.add_argument("--input", default="-", help="one weight per line; '-' for stdin (default)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("converge", help="per-N trace of E1, E2 and E4-hat")
    p.add_argument("--dist", type=_dist, required=True, help="uniform | power:<alpha> | exp | expint")
    p.add_argument("--n", "--n-max", dest="n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("ensemble", help="replica histograms of E1 and E2 with Gaussian overlays")
    p.add_argument("--dist", type=_dist, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="ensemble", help="prefix for <out>_e1.csv, <out>_e2.csv, <out>_summary.json")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("counterexample", help="0/1 weights where the unbiased E4 goes negative")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--b", type=float, default=0.5)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("stability", help="E2 and E4-hat of offset weights three ways")
    p.add_argument("--offset", type=float, default=1e8)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"mcerr {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
