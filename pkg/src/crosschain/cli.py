"""Command line entry point.

Exit statuses: 0 success, 1 domain failure, 2 input or parse failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from .config import ConfigError, load_config, load_preset, scenario_from_config, security_inputs, topology_from_config
from .metrics import read_csvs, write_csvs
from .security import security_table
from .sim import run as run_scenario
from .sim import summarize
from .topology import TopologyError, unreachable_pairs

OK, DOMAIN_FAILURE, INPUT_FAILURE = 0, 1, 2


def _load(args) -> dict:
    if getattr(args, "preset", None):
        if args.config:
            raise ConfigError("give either a config path or --preset, not both")
        return load_preset(args.preset)
    if not args.config:
        raise ConfigError("a config path or --preset is required")
    return load_config(args.config)


def cmd_validate(args) -> int:
    cfg = _load(args)
    g = topology_from_config(cfg, enforce_cap=False)
    cap = cfg["topology"].get("max_out_degree", g.max_out_degree)
    status = OK
    pairs = unreachable_pairs(g)
    for a, b in pairs:
        print(f"unreachable: {a} -> {b}")
    if pairs:
        status = DOMAIN_FAILURE
    for n in sorted(g.nodes):
        if g.out_degree(n) > int(cap):
            print(f"out-degree of {n} is {g.out_degree(n)} > max_out_degree {cap}")
            status = DOMAIN_FAILURE
    if status == OK and not args.quiet:
        print(f"ok: {len(g.nodes)} blockchains, {len(g.edges)} direct connections, strongly connected")
    return status


def cmd_run(args) -> int:
    cfg = _load(args)
    scenario = scenario_from_config(cfg, seed=args.seed, duration_ticks=args.duration_ticks)
    log = run_scenario(scenario)
    write_csvs(log, args.out)
    text = summarize(log).to_text()
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(f"scenario: {scenario.name}, seed {scenario.rng_seed}, {scenario.duration_ticks} ticks\n")
        fh.write(text)
    if not args.quiet:
        print(text, end="")
    return OK


def cmd_analyze_security(args) -> int:
    ps, sets = security_inputs(_load(args))
    try:
        rows = security_table(ps, sets)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_FAILURE
    print(f"{'chains':<20} {'pb':>14} {'pf':>14} {'intact':>14} {'log10_pb':>10} {'sum':>6}")
    for r in rows:
        total = r["pb"] + r["pf"] + r["intact"]
        chains = ",".join(map(str, r["chains"]))
        print(f"{chains:<20} {r['pb']:>14.6g} {r['pf']:>14.6g} {r['intact']:>14.6g} {r['log10_pb']:>10.4f} {total:>6.3f}")
    return OK


def cmd_report(args) -> int:
    try:
        log = read_csvs(args.out_dir)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read metrics from {args.out_dir}: {exc}") from None
    print(summarize(log).to_text(), end="")
    return OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--duration-ticks", type=int, help="override the run length")
    common.add_argument("--quiet", action="store_true", help="print only failures")
    common.add_argument("-v", "--verbose", action="store_true", help="log propagation faults")

    def with_config(p):
        p.add_argument("config", nargs="?", help="scenario config file (YAML)")
        p.add_argument("--preset", help="use a bundled preset instead of a file")
        return p

    parser = argparse.ArgumentParser(prog="crosschain", description="Cross-chain topology and propagation simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    with_config(sub.add_parser("validate", parents=[common], help="check a topology is strongly connected")).set_defaults(func=cmd_validate)
    p = with_config(sub.add_parser("run", parents=[common], help="run a scenario and write CSV metrics"))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)
    analyze = sub.add_parser("analyze", help="analytical evaluations")
    asub = analyze.add_subparsers(dest="what", required=True)
    with_config(asub.add_parser("security", parents=[common], help="fake/detect probability table")).set_defaults(func=cmd_analyze_security)
    p = sub.add_parser("report", parents=[common], help="summarize CSVs from a previous run")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_FAILURE
    except TopologyError as exc:
        print(f"invalid topology: {exc}", file=sys.stderr)
        return DOMAIN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
