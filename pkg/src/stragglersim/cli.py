"""Command-line entry point.

Exit codes: 0 success, 1 bad manifest / config / trace schema, 2 I/O failure.
Results go to stdout; diagnostics and progress go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .config import ManifestError, load_run_manifest, load_sweep_manifest
from .metrics_trace import TraceSchemaError, export_trace, load_trace
from .sim_engine import InvalidConfig, run
from .straggler_model import Histogram, ModelError, fit_profile_weights, profile_residual

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _err(msg: str) -> None:
    print(f"stragglersim: {msg}", file=sys.stderr)


def _io(exc: OSError) -> _Fail:
    return _Fail(EXIT_IO, f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": "))


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    try:
        manifest = load_run_manifest(args.manifest)
    except OSError as exc:
        raise _io(exc)
    config = manifest.config
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    result = run(config)
    if args.trace_out:
        try:
            export_trace(result.trace, args.format, args.trace_out, width=args.width,
                         row_height=args.row_height, title=manifest.title)
        except OSError as exc:
            raise _io(exc)
    out = {"makespan": result.makespan, **result.metrics.to_dict()}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .experiments import sweep, write_csv, write_json

    try:
        spec = load_sweep_manifest(args.manifest)
    except OSError as exc:
        raise _io(exc)
    if args.reps is not None:
        try:
            spec = dataclasses.replace(spec, repetitions=args.reps)
        except InvalidConfig as exc:
            raise _Fail(EXIT_CONFIG, str(exc))

    def progress(done, total):
        if not args.quiet:
            print(f"\r[{done}/{total}] cells", end="" if done < total else "\n",
                  file=sys.stderr, flush=True)

    result = sweep(spec, progress=progress)
    try:
        write_csv(result, args.out)
        if args.json:
            write_json(result, args.json)
    except OSError as exc:
        raise _io(exc)
    return EXIT_OK


def _load_histogram(path) -> Histogram:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise _io(exc)
    except json.JSONDecodeError as exc:
        raise _Fail(EXIT_CONFIG, f"{path}: not valid JSON: {exc}")
    try:
        return Histogram.from_dict(raw)
    except (ModelError, TypeError, ValueError) as exc:
        raise _Fail(EXIT_CONFIG, f"{path}: {exc}")


def cmd_fit_profile(args) -> int:
    target = _load_histogram(args.target)
    basis = [_load_histogram(p) for p in args.basis]
    weights = fit_profile_weights(target, basis)
    out = {"weights": [float(w) for w in weights],
           "residual": profile_residual(target, basis, weights)}
    print(json.dumps(out))
    return EXIT_OK


def cmd_export_trace(args) -> int:
    try:
        trace = load_trace(args.trace)
        export_trace(trace, args.format, args.out, width=args.width,
                     row_height=args.row_height, title=args.title)
    except OSError as exc:
        raise _io(exc)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stragglersim",
                                description="Group-replication straggler simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def size_flags(sp):
        sp.add_argument("--width", type=int, default=1000, help="SVG width in pixels")
        sp.add_argument("--row-height", type=int, default=28, help="SVG row height in pixels")

    s = sub.add_parser("simulate", help="run one simulation from a manifest")
    s.add_argument("manifest")
    s.add_argument("--trace-out", help="write the trace here")
    s.add_argument("--format", choices=("json", "svg"), default="json")
    s.add_argument("--seed", type=int, help="override the manifest seed")
    size_flags(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="Monte-Carlo sweep from a sweep manifest")
    s.add_argument("manifest")
    s.add_argument("--out", required=True, help="CSV output path")
    s.add_argument("--json", help="also write a JSON mirror of the table")
    s.add_argument("--reps", type=int, help="override the repetition count")
    s.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit-profile", help="fit convex weights of basis histograms to a target")
    s.add_argument("target")
    s.add_argument("basis", nargs="+")
    s.set_defaults(func=cmd_fit_profile)

    s = sub.add_parser("export-trace", help="re-render a JSON trace")
    s.add_argument("trace")
    s.add_argument("--format", choices=("json", "svg"), default="svg")
    s.add_argument("--out", required=True)
    s.add_argument("--title")
    size_flags(s)
    s.set_defaults(func=cmd_export_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except _Fail as exc:
        _err(str(exc))
        return exc.code
    except (ManifestError, InvalidConfig, ModelError, TraceSchemaError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(_io(exc)))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
