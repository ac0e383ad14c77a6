"""Scenario config files (YAML) and the bundled presets.

A config has the sections ``topology``, ``consensus``, ``formats``,
``workloads``, ``run`` and optionally ``security``::

    topology:
      nodes: [1, 2, 3]
      kind: ring            # ring | star | full, or give `edges: [[1, 2], ...]`
      hub: 1                # star only
      max_out_degree: 4
      selection_accounts: [sel-a, sel-b, sel-c]
      threshold: 2/3
      proposals:
        - {tick: 50, proposer: sel-a, edge: [1, 3], agreements: [sel-a, sel-b]}
    consensus:
      default: {kind: pow, difficulty_bits: 12}
      chains:
        3: {kind: pos, accounts: 16, base_asset: 1000, asset_step: 10}
    formats:
      default: variant      # variant | identity
      chains:
        2: {field_order: [...], field_names: {amount: amt}, amount_unit_scale: 100}
    workloads:
      streams: [{chain: 1, rate: 600}, {chain: 2, rate: 600, kind: internal}]
      pairs: [{tick: 2, chains: [1, 3], amount: 10}]
    run: {duration_ticks: 600, seed: 1, ticks_per_minute: 60, node_counts: {1: 2}}
    security: {p: {1: 0.1, 2: 0.1}, sets: [[1, 2]]}
"""
from __future__ import annotations

from fractions import Fraction
from importlib import resources
from typing import Any, Optional

import yaml

from .chain import TxKind
from .consensus import ConsensusConfig, ConsensusKind
from .formats import FormatError, FormatSpec, identity_spec, variant_spec
from .sim import PairedInjection, Scenario, ScheduledProposal, Workload
from .topology import (
    DEFAULT_THRESHOLD,
    MembershipProposal,
    TopologyError,
    TopologyGraph,
    build_topology,
)

PRESET_NAMES = ("s1_router", "s1_ring", "s2_router", "s2_ring", "fig12_indirect", "fig14_direct", "bridge_join")


class ConfigError(ValueError):
    """The config file is unreadable or structurally malformed."""


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    text = resources.files("crosschain").joinpath("presets", f"{name}.yaml").read_text()
    return yaml.safe_load(text)


def _section(cfg: dict, key: str, required: bool = True) -> dict:
    sec = cfg.get(key)
    if sec is None:
        if required:
            raise ConfigError(f"missing section {key!r}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {key!r} must be a mapping")
    return sec


def _int_keys(mapping: Any, what: str) -> dict[int, Any]:
    if mapping is None:
        return {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{what} must be a mapping keyed by blockchain id")
    try:
        return {int(k): v for k, v in mapping.items()}
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: keys must be blockchain ids") from None


def _fraction(value: Any) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad fraction {value!r}") from None


def topology_from_config(cfg: dict, enforce_cap: bool = True) -> TopologyGraph:
    """Build the graph; with ``enforce_cap=False`` the degree cap is lifted so
    connectivity can be reported independently of it."""
    sec = _section(cfg, "topology")
    try:
        nodes = [int(n) for n in sec["nodes"]]
    except (KeyError, TypeError, ValueError):
        raise ConfigError("topology.nodes must be a list of blockchain ids") from None
    cap = sec.get("max_out_degree")
    if "edges" in sec:
        try:
            edges = {(int(a), int(b)) for a, b in sec["edges"]}
        except (TypeError, ValueError):
            raise ConfigError("topology.edges must be a list of [from, to] pairs") from None
        g_cap = cap if cap is not None else 4
        if not enforce_cap:
            g_cap = max(g_cap, len(nodes))
        return TopologyGraph(frozenset(nodes), frozenset(edges), int(g_cap))
    kind = sec.get("kind")
    if kind not in ("ring", "star", "full"):
        raise ConfigError("topology needs `edges` or `kind` in {ring, star, full}")
    g = build_topology(kind, nodes, sec.get("hub"), None)
    if cap is not None:
        if enforce_cap:
            return TopologyGraph(g.nodes, g.edges, int(cap))
    return g


def _consensus(spec: dict, chain: int) -> ConsensusConfig:
    kind = spec.get("kind", "pow")
    try:
        kind = ConsensusKind(kind)
    except ValueError:
        raise ConfigError(f"chain {chain}: unknown consensus kind {kind!r}") from None
    accounts = spec.get("accounts", ())
    if isinstance(accounts, int):
        base, step = int(spec.get("base_asset", 1000)), int(spec.get("asset_step", 10))
        accounts = [(f"s{chain}-{i:02d}", base + step * i) for i in range(accounts)]
    try:
        return ConsensusConfig(
            kind=kind,
            pow_difficulty_bits=int(spec.get("difficulty_bits", 16)),
            nonce_budget=spec.get("nonce_budget"),
            pos_accounts=tuple((str(a), int(v)) for a, v in accounts),
            pos_weight_decrement=spec.get("weight_decrement"),
            pos_slot_ticks=int(spec.get("slot_ticks", 5)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"chain {chain}: {exc}") from None


def _format(spec: Any, chain: int, default: str) -> FormatSpec:
    if spec is None:
        spec = default
    if spec == "variant":
        return variant_spec(chain)
    if spec == "identity":
        return identity_spec(chain)
    if not isinstance(spec, dict):
        raise ConfigError(f"chain {chain}: bad format spec {spec!r}")
    try:
        base = variant_spec(chain) if spec.get("base", default) == "variant" else identity_spec(chain)
        return FormatSpec(
            int(spec.get("format_id", chain)),
            tuple(spec.get("field_order", base.field_order)),
            dict(spec.get("field_names", base.field_names)),
            int(spec.get("amount_unit_scale", base.amount_unit_scale)),
        )
    except (FormatError, TypeError, ValueError) as exc:
        raise ConfigError(f"chain {chain}: {exc}") from None


def scenario_from_config(cfg: dict, seed: Optional[int] = None, duration_ticks: Optional[int] = None) -> Scenario:
    """Raises ConfigError for malformed input and TopologyError for invalid graphs."""
    g = topology_from_config(cfg)
    topo = _section(cfg, "topology")
    cons_sec = _section(cfg, "consensus", required=False)
    default_cons = cons_sec.get("default", {}) or {}
    per_chain = _int_keys(cons_sec.get("chains"), "consensus.chains")
    consensus = {c: _consensus({**default_cons, **(per_chain.get(c) or {})}, c) for c in sorted(g.nodes)}

    fmt_sec = _section(cfg, "formats", required=False)
    default_fmt = fmt_sec.get("default", "variant")
    fmt_chains = _int_keys(fmt_sec.get("chains"), "formats.chains")
    formats = {c: _format(fmt_chains.get(c), c, default_fmt) for c in sorted(g.nodes)}

    wl = _section(cfg, "workloads", required=False)
    try:
        streams = [
            Workload(int(s["chain"]), float(s["rate"]), TxKind.INTERNAL if s.get("kind") == "internal" else TxKind.CROSS_CHAIN)
            for s in wl.get("streams", []) or []
        ]
        pairs = [
            PairedInjection(int(p["tick"]), (int(p["chains"][0]), int(p["chains"][1])), int(p.get("amount", 10)))
            for p in wl.get("pairs", []) or []
        ]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad workload entry: {exc}") from None

    threshold = _fraction(topo.get("threshold", DEFAULT_THRESHOLD))
    try:
        proposals = [
            ScheduledProposal(
                int(p["tick"]),
                MembershipProposal(
                    str(p["proposer"]),
                    (int(p["edge"][0]), int(p["edge"][1])),
                    frozenset(str(a) for a in p.get("agreements", [])),
                    threshold,
                    remove=bool(p.get("remove", False)),
                ),
            )
            for p in topo.get("proposals", []) or []
        ]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad topology proposal: {exc}") from None

    run = _section(cfg, "run", required=False)
    try:
        return Scenario(
            topology=g,
            consensus=consensus,
            formats=formats,
            node_counts={c: int(n) for c, n in _int_keys(run.get("node_counts"), "run.node_counts").items()},
            workloads=streams,
            pairs=pairs,
            duration_ticks=int(duration_ticks if duration_ticks is not None else run.get("duration_ticks", 600)),
            rng_seed=int(seed if seed is not None else run.get("seed", 0)),
            ticks_per_minute=int(run.get("ticks_per_minute", 60)),
            sync_period=int(run.get("sync_period", 1)),
            sync_budget_blocks=run.get("sync_budget_blocks", 4),
            pos_sync_multiplier=int(run.get("pos_sync_multiplier", 2)),
            crosschain_reward=int(run.get("crosschain_reward", 1)),
            selection_accounts=tuple(str(a) for a in topo.get("selection_accounts", []) or []),
            threshold=threshold,
            proposals=proposals,
            name=str(cfg.get("name", "scenario")),
        )
    except TopologyError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def security_inputs(cfg: dict) -> tuple[dict[int, float], list[list[int]]]:
    sec = _section(cfg, "security")
    ps = _int_keys(sec.get("p"), "security.p")
    if not ps:
        raise ConfigError("security.p is empty")
    try:
        ps = {c: float(v) for c, v in ps.items()}
        sets = [[int(c) for c in s] for s in sec.get("sets", [sorted(ps)])]
    except (TypeError, ValueError):
        raise ConfigError("security.p values must be numbers and sets lists of ids") from None
    return ps, sets
