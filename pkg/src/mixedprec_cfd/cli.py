"""Command-line entry point: ``run``, ``compare``, ``sweep`` and ``report``.

Exit status is 0 on clean completion, 2 when a run diverged and 1 on a
configuration or input error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import harness
from .errors import ComparisonError, ConfigurationError

log = logging.getLogger("mixedprec_cfd")


def _cmd_run(args) -> int:
    cfg = harness.load_config_file(args.config)
    if args.output:
        cfg = harness.dataclasses.replace(cfg, output=args.output)
    if args.threads:
        cfg = harness.dataclasses.replace(cfg, threads=args.threads)
    res = harness.run(cfg)
    if not cfg.output:
        sys.stdout.write(res.csv())
    sys.stderr.write(harness.summary_json(res.summary()) + "\n")
    return res.exit_code


def _cmd_compare(args) -> int:
    rep = harness.compare(args.candidate, args.reference)
    for t, d in zip(rep.times, rep.abs_diff):
        print(f"{t!r},{d!r}")
    print(harness.summary_json({"mean_abs_diff": rep.mean_abs_diff,
                                "max_abs_diff": rep.max_abs_diff,
                                "candidate_diverged": rep.candidate_diverged}))
    return harness.EXIT_DIVERGED if rep.candidate_diverged else harness.EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        spec = harness.load_sweep(fh.read())
    if args.output:
        spec = harness.dataclasses.replace(spec, output=args.output)

    def runner(cfg):
        log.info("run %s dt=%r M=%r", cfg.precision, cfg.dt, cfg.M)
        return harness.run(cfg)

    res = harness.sweep(spec, runner)
    if not spec.output:
        sys.stdout.write(res.csv())
    flagged = any(res.diverged.values()) or any(res.reference_diverged.values())
    return harness.EXIT_DIVERGED if flagged else harness.EXIT_OK


def _cmd_report(args) -> int:
    cfg = harness.load_config_file(args.config)
    print(harness.summary_json(harness.report(cfg)))
    return harness.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixedprec-cfd",
                                description="Mixed-precision Taylor-Green vortex solver")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation and write its diagnostics CSV")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="CSV path (default: config 'output' or stdout)")
    r.add_argument("--threads", type=int, help="override the config thread count")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="compare two diagnostics CSV files")
    c.add_argument("candidate")
    c.add_argument("reference")
    c.set_defaults(func=_cmd_compare)

    s = sub.add_parser("sweep", help="run a dt / Mach / precision sweep")
    s.add_argument("spec")
    s.add_argument("-o", "--output", help="matrix CSV path (default: stdout)")
    s.set_defaults(func=_cmd_sweep)

    m = sub.add_parser("report", help="memory and communication report without running")
    m.add_argument("config")
    m.set_defaults(func=_cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ComparisonError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
