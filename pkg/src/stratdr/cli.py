"""Command-line entry point: ``stratdr {generate,estimate,sweep,sensitivity,selftest}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .datagen import DataGenConfig, gen_dataset
from .domain import read_dataset, validate_dataset, write_dataset
from .errors import ConfigError, StratDRError
from .estimator import SdrConfig
from .harness import (
    METHODS,
    SPEC_CELLS,
    ScenarioConfig,
    run_sensitivity,
    run_sweep,
    write_outputs,
    write_replications,
    write_rows,
)

log = logging.getLogger("stratdr")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _scenario(args) -> ScenarioConfig:
    raw = json.loads(Path(args.config).read_text()) if args.config else {}
    for key, attr in (("alpha_grid", "alphas"), ("n_grid", "ns"), ("d_grid", "ds"),
                      ("methods", "methods"), ("spec_cells", "spec_cells"),
                      ("replications", "replications"), ("gamma_grid", "gammas")):
        val = getattr(args, attr, None)
        if val is not None:
            raw[key] = val
    if args.seed is not None:
        raw["master_seed"] = args.seed
    return ScenarioConfig.from_dict(raw)


def cmd_generate(args) -> int:
    cfg = DataGenConfig.default(args.n, args.d, alpha=args.alpha, seed=args.seed or 0,
                                tau_direct=args.tau)
    ds = gen_dataset(cfg)
    write_dataset(ds, args.out)
    log.info("wrote %s (n=%d, treated=%d, equilibrium converged=%s)",
             args.out, ds.n, int(ds.t.sum()), ds.oracle.equilibrium_converged)
    return 0


def cmd_estimate(args) -> int:
    ds = read_dataset(args.data)
    problems = validate_dataset(ds)
    if problems:
        for p in problems[:20]:
            print(p, file=sys.stderr)
        return 2
    pmap, omap = SPEC_CELLS[args.spec_cell]
    cfg = SdrConfig(propensity_map=pmap, outcome_map=omap, ci_level=args.ci_level)
    report = METHODS[args.method](ds.observed, cfg)
    out = report.to_dict()
    if ds.oracle is not None:
        out["tau_true"] = ds.oracle.tau_true
    text = json.dumps(out, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.influence:
        Path(args.influence).write_text(
            "influence\n" + "".join(format(v, ".17g") + "\n" for v in report.influence))
    return 0


def cmd_sweep(args) -> int:
    cfg = _scenario(args)
    results = run_sweep(cfg, jobs=args.jobs)
    rows = [r.row for r in results]
    if args.out:
        write_outputs(rows, args.format, args.out)
    else:
        for r in rows:
            print(json.dumps(r.__dict__))
    if args.dump_replications:
        write_replications(results, args.dump_replications)
    failed = [r for r in results if r.failed]
    for r in failed:
        print(f"cell failed: {r.row.method} alpha={r.row.alpha} n={r.row.n} d={r.row.d} "
              f"{r.row.spec_cell}: {r.errors}/{len(r.replications)} replications errored",
              file=sys.stderr)
    return 1 if failed else 0


def cmd_sensitivity(args) -> int:
    cfg = _scenario(args)
    if not cfg.gamma_grid:
        raise ConfigError("sensitivity needs --gammas or gamma_grid in the config")
    rows = run_sensitivity(cfg, jobs=args.jobs)
    if args.out:
        write_rows(rows, args.format, args.out)
    else:
        for r in rows:
            print(json.dumps(r.__dict__))
    return 0


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(quick=not args.full)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stratdr", description="Simulate strategic treatment games and estimate treatment effects.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate one strategic dataset (CSV + oracle JSON)")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--d", type=int, default=5)
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--tau", type=float, default=0.5)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="run one estimator on a dataset CSV")
    e.add_argument("--data", required=True)
    e.add_argument("--method", choices=list(METHODS), default="SDR")
    e.add_argument("--spec-cell", choices=list(SPEC_CELLS), default="both_correct")
    e.add_argument("--ci-level", type=float, default=0.95)
    e.add_argument("--out")
    e.add_argument("--influence", help="also write influence values to this CSV")
    e.set_defaults(func=cmd_estimate)

    for name, func, helptext in (
            ("sweep", cmd_sweep, "Monte Carlo sweep over the scenario grid"),
            ("sensitivity", cmd_sensitivity, "gamma-sensitivity bounds over the grid")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="ScenarioConfig JSON file")
        s.add_argument("--seed", type=int, help="master seed (overrides config)")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--out")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--alphas", type=_floats)
        s.add_argument("--ns", type=_ints)
        s.add_argument("--ds", type=_ints)
        s.add_argument("--methods", type=lambda t: t.split(","))
        s.add_argument("--spec-cells", type=lambda t: t.split(","))
        s.add_argument("--replications", type=int)
        s.add_argument("--gammas", type=_floats)
        if name == "sweep":
            s.add_argument("--dump-replications", metavar="PATH",
                           help="write per-replication estimates to this CSV")
        s.set_defaults(func=func)

    t = sub.add_parser("selftest", help="run the acceptance checks")
    t.add_argument("--full", action="store_true", help="full-scale Monte Carlo (minutes)")
    t.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StratDRError, OSError, json.JSONDecodeError) as exc:
        print(f"stratdr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
