"""Command-line runner.

    stochconv <kind> [--config PATH] [--out DIR] [--seed U64] [--threads N] [--check NAME]
    stochconv run --config PATH ...
    stochconv suite [--out DIR] [--seed U64] [--threads N] [--check NAME]

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical error.  The default output directory comes from
``STOCHCONV_OUT`` (falling back to ``./stochconv-out``).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np
import scipy.linalg

from stochconv import __version__, config as cfgmod, experiments, report
from stochconv.model import GeneratorError, MatrixFunctionError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "STOCHCONV_OUT"
NUMERICAL_ERRORS = (ArithmeticError, GeneratorError, MatrixFunctionError, np.linalg.LinAlgError,
                    scipy.linalg.LinAlgError)


def default_out() -> str:
    return os.environ.get(OUT_ENV, os.path.join(os.getcwd(), "stochconv-out"))


def _experiment_report(cfg: cfgmod.ExperimentConfig, workers: int, check_filter: str | None):
    res = report.Result()
    try:
        res = experiments.run(cfg, workers)
    except NUMERICAL_ERRORS as exc:
        res.error = {"type": type(exc).__name__, "message": str(exc)}
    if check_filter is not None and not experiments.matches(check_filter, cfg.id):
        res.checks = [c for c in res.checks if experiments.matches(check_filter, c["name"])]
    rep = {
        "experiment": cfg.id,
        "kind": cfg.kind,
        "family": cfg.family,
        "seed": cfg.seed,
        "config_hash": cfgmod.config_hash(cfg),
        "config": cfgmod.dumps(cfg),
        "checks": res.checks,
        "error": res.error,
        "passed": res.passed,
    }
    return rep, res


def _exit_code(reports: list) -> int:
    if any(r["error"] is not None for r in reports):
        return EXIT_NUMERIC
    return EXIT_PASS if all(r["passed"] for r in reports) else EXIT_FAIL


def run_experiment(cfg: cfgmod.ExperimentConfig, out_dir: str, workers: int = 1,
                   check_filter: str | None = None) -> tuple[dict, int]:
    """Run one experiment; writes ``report.json`` and its CSV tables into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    rep, res = _experiment_report(cfg, workers, check_filter)
    rep["tables"] = [os.path.basename(t.write(out_dir)) for t in res.tables]
    report.write_json(os.path.join(out_dir, "report.json"), rep)
    return rep, _exit_code([rep])


def run_suite(out_dir: str, seed: int | None = None, workers: int = 1, check_filter: str | None = None,
              log=None) -> tuple[dict, int]:
    """Run the acceptance battery; one combined ``report.json`` plus prefixed CSV tables."""
    os.makedirs(out_dir, exist_ok=True)
    experiments.clear_cache()
    configs = experiments.suite_configs() if seed is None else experiments.suite_configs(seed)
    reps = []
    for cfg in configs:
        if check_filter is not None and not experiments.matches(check_filter, cfg.id) and \
                not any(experiments.matches(check_filter, t) for t in cfg.id.split("-")[:2]):
            continue
        rep, res = _experiment_report(cfg, workers, check_filter)
        rep["tables"] = [os.path.basename(t.write(out_dir, prefix=f"{cfg.id}_")) for t in res.tables]
        reps.append(rep)
        if log is not None:
            log(f"{cfg.id}: {'pass' if rep['passed'] else 'FAIL'}")
    experiments.clear_cache()
    checks = [c for r in reps for c in r["checks"]]
    suite = {
        "suite": "acceptance",
        "seed": configs[0].seed,
        "experiments": reps,
        "criteria": experiments.criterion_verdicts(checks),
        "passed": all(r["passed"] for r in reps),
    }
    report.write_json(os.path.join(out_dir, "report.json"), suite)
    return suite, _exit_code(reps)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochconv", description="Stochastic convolution experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_config=False):
        p.add_argument("--config", metavar="PATH", required=need_config, help="experiment config (INI)")
        p.add_argument("--out", metavar="DIR", default=None, help=f"output directory (default ${OUT_ENV})")
        p.add_argument("--seed", type=int, default=None, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for ensemble generation")
        p.add_argument("--check", metavar="NAME", default=None, help="only keep checks matching NAME")

    for kind in cfgmod.KINDS:
        common(sub.add_parser(kind, help=f"run a {kind} experiment"))
    common(sub.add_parser("run", help="run the experiment described by --config"), need_config=True)
    common(sub.add_parser("suite", help="run the full acceptance battery"))
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = args.out or default_out()
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("sampling.seed: must fit in an unsigned 64-bit integer")
        if args.command == "suite":
            if args.config:
                raise cfgmod.ConfigError("suite: --config is not accepted (the battery is fixed)")
            suite, code = run_suite(out, args.seed, args.threads, args.check,
                                    log=lambda s: print(s, file=sys.stderr))
            for tag, ok in suite["criteria"].items():
                print(f"{tag}: {'pass' if ok else 'FAIL'}")
            return code
        if args.config:
            cfg = cfgmod.load(args.config)
            if args.command != "run" and cfg.kind != args.command:
                raise cfgmod.ConfigError(f"experiment.kind: config kind {cfg.kind!r} does not match "
                                         f"subcommand {args.command!r}")
        else:
            cfg = experiments.default_config(args.command)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep, code = run_experiment(cfg, out, args.threads, args.check)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for c in rep["checks"]:
        print(f"{c['verdict']:4s}  {c['name']}  {c['statistic']!r}")
    if rep["error"] is not None:
        print(f"numerical error: {rep['error']['type']}: {rep['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
