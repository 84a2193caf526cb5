"""Command-line entry points.

  comply run <scenario> [--trace PATH] [--summary PATH] [--max-ticks N] [--seed N]
  comply check <constraint-file-or-scenario>
  comply batch <dir> [--parallel N] [--out DIR]

Exit codes: 0 success, 1 validation error, 2 episode failure (e.g. collision),
3 timeout.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import os
import sys
from typing import Optional

from .envs.base import ScenarioSetupError
from .harness import run_scenario
from .lang.lexer import tokenize
from .lang.parser import load_scenario, parse_constraint_file

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FAILURE = 2
EXIT_TIMEOUT = 3

_OUTCOME_CODES = {"success": EXIT_OK, "failure": EXIT_FAILURE, "timeout": EXIT_TIMEOUT}


def _print_diagnostics(diagnostics, stream=None):
    stream = stream or sys.stderr
    for d in diagnostics:
        print(d.render(), file=stream)


def _load_validated(path: str, max_ticks: Optional[int], seed: Optional[int]):
    result = load_scenario(path)
    if not result.ok:
        return None, result.diagnostics
    spec = result.spec
    overrides = {}
    if max_ticks is not None:
        overrides["max_ticks"] = max_ticks
    if seed is not None:
        overrides["seed"] = seed
    if overrides:
        spec.run = dataclasses.replace(spec.run, **overrides)
    return spec, result.diagnostics


def run_one(path: str, trace_path=None, summary_path=None, max_ticks=None, seed=None):
    """Run a single scenario; returns (exit code, summary text or None)."""
    spec, diagnostics = _load_validated(path, max_ticks, seed)
    _print_diagnostics(diagnostics)
    if spec is None:
        return EXIT_VALIDATION, None
    try:
        result = run_scenario(spec)
    except ScenarioSetupError as exc:
        print(f"{path}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION, None
    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write(result.trace_text)
    if summary_path:
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write(result.summary_text)
    return _OUTCOME_CODES[result.summary.outcome], result.summary_text


def cmd_run(args) -> int:
    code, summary_text = run_one(
        args.scenario,
        trace_path=args.trace,
        summary_path=args.summary,
        max_ticks=args.max_ticks,
        seed=args.seed,
    )
    if summary_text is not None and not args.summary:
        sys.stdout.write(summary_text)
    return code


def _looks_like_constraint_file(source: str) -> bool:
    toks = tokenize(source)
    first = toks[0]
    return first.kind == "EOF" or (first.kind == "IDENT" and first.text == "constraint")


def cmd_check(args) -> int:
    try:
        with open(args.file, "r", encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        print(f"cannot read '{args.file}': {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if _looks_like_constraint_file(source):
        result = parse_constraint_file(source, file=args.file)
    else:
        result = load_scenario(args.file)
    _print_diagnostics(result.diagnostics)
    return EXIT_OK if result.ok else EXIT_VALIDATION


def _batch_worker(item):
    path, out_dir = item
    stem = os.path.splitext(os.path.basename(path))[0]
    base = out_dir if out_dir else os.path.dirname(path)
    trace_path = os.path.join(base, stem + ".trace")
    summary_path = os.path.join(base, stem + ".summary")
    code, _ = run_one(path, trace_path=trace_path, summary_path=summary_path)
    return path, code


def cmd_batch(args) -> int:
    paths = []
    for root, _, files in os.walk(args.dir):
        for name in files:
            if name.endswith(".scn"):
                paths.append(os.path.join(root, name))
    paths.sort()
    if not paths:
        print(f"no .scn files under '{args.dir}'", file=sys.stderr)
        return EXIT_VALIDATION
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    items = [(p, args.out) for p in paths]
    results = []
    if args.parallel > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_batch_worker, items))
    else:
        results = [_batch_worker(item) for item in items]
    worst = EXIT_OK
    names = {EXIT_OK: "success", EXIT_VALIDATION: "validation-error", EXIT_FAILURE: "failure", EXIT_TIMEOUT: "timeout"}
    for path, code in sorted(results):
        print(f"{path}: {names[code]}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comply", description="Constraint-compliance engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--trace", help="write the event trace to this path")
    p_run.add_argument("--summary", help="write the run summary to this path")
    p_run.add_argument("--max-ticks", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="parse and validate a constraint file or scenario")
    p_check.add_argument("file")
    p_check.set_defaults(func=cmd_check)

    p_batch = sub.add_parser("batch", help="run every .scn under a directory")
    p_batch.add_argument("dir")
    p_batch.add_argument("--parallel", type=int, default=1)
    p_batch.add_argument("--out", help="directory for trace/summary outputs")
    p_batch.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
