"""Command-line entry point: ``alang run | table | check``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ..errors import DatasetError, NumericAbort, SpecError

EXIT_OK, EXIT_FAIL, EXIT_SPEC, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alang", description="Anchored Langevin experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every experiment in a spec file")
    run.add_argument("spec", type=Path)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--seed", type=int, default=None, help="override the seed of every experiment")
    run.add_argument("--threads", type=int, default=1,
                     help="BLAS threads; repeats run in a fixed order so output does not depend on it")

    table = sub.add_parser("table", help="regenerate the iterations-to-threshold table")
    table.add_argument("suite", type=Path)
    table.add_argument("--out", type=Path, default=Path("table.csv"))
    table.add_argument("--seed", type=int, default=None)

    sub.add_parser("check", help="run the fast oracle and property checks")
    return p


def _load(path, seed):
    from .spec import load_specs

    specs = load_specs(path)
    if seed is not None:
        specs = [s.with_overrides(seed=seed) for s in specs]
    return specs


def _cmd_run(args) -> int:
    from .output import emit_results
    from .runners import run_experiment

    os.environ.setdefault("OMP_NUM_THREADS", str(max(1, args.threads)))
    specs = _load(args.spec, args.seed)
    for i, spec in enumerate(specs):
        out = args.out if len(specs) == 1 else args.out / (spec.name or f"experiment_{i}")
        result = run_experiment(spec)
        emit_results(result, out)
        print(f"{spec.name or spec.kind}: final {result.metric} = {result.final:.6g} -> {out}")
    return EXIT_OK


def _cmd_table(args) -> int:
    from .output import write_table
    from .runners import run_laplace_experiment

    specs = _load(args.suite, args.seed)
    results = []
    for spec in specs:
        if spec.kind not in ("laplace1d", "laplace_md"):
            raise SpecError(f"table suites hold Laplace experiments only, got {spec.kind}")
        if spec.threshold is None:
            raise SpecError("table experiments need a threshold")
        results.append(run_laplace_experiment(spec.with_overrides(stop_at_threshold=True)))
    path = write_table(results, args.out)
    print(path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _cmd_check(args) -> int:
    from ..checks import run_checks

    failures = 0
    for name, ok, detail in run_checks():
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if failures == 0 else EXIT_FAIL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "table": _cmd_table, "check": _cmd_check}[args.command]
    try:
        return handler(args)
    except (SpecError, DatasetError) as exc:
        print(f"alang: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except NumericAbort as exc:
        print(f"alang: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
