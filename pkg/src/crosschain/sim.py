"""Scenario runs: workload injection, the tick loop and summary statistics."""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .chain import Account, ChainState, DEFAULT_CROSSCHAIN_REWARD, PendingTx, Transaction, TxKind
from .consensus import ConsensusConfig
from .formats import FormatSpec, make_transaction
from .metrics import Injection, MetricsLog
from .propagation import (
    DEFAULT_POS_SYNC_MULTIPLIER,
    DEFAULT_SYNC_BUDGET_BLOCKS,
    World,
    propagate_tick,
    settle_dependencies,
)
from .topology import (
    DEFAULT_THRESHOLD,
    MembershipProposal,
    TopologyError,
    TopologyGraph,
    is_strongly_connected,
)

RATE_RANGE = (150, 5000)
DEFAULT_WARMUP_FRACTION = 0.1


@dataclass(frozen=True)
class Workload:
    """Poisson stream of transactions on one chain, ``rate`` per simulated minute."""

    chain: int
    rate: float
    kind: TxKind = TxKind.CROSS_CHAIN


@dataclass(frozen=True)
class PairedInjection:
    """Two cross-chain transactions on two chains, each depending on the other."""

    tick: int
    chains: tuple[int, int]
    amount: int = 10


@dataclass(frozen=True)
class ScheduledProposal:
    tick: int
    proposal: MembershipProposal


@dataclass
class Scenario:
    topology: TopologyGraph
    consensus: dict[int, ConsensusConfig]
    formats: dict[int, FormatSpec]
    node_counts: dict[int, int] = field(default_factory=dict)
    workloads: list[Workload] = field(default_factory=list)
    pairs: list[PairedInjection] = field(default_factory=list)
    duration_ticks: int = 600
    rng_seed: int = 0
    ticks_per_minute: int = 60
    sync_period: int = 1
    sync_budget_blocks: Optional[int] = DEFAULT_SYNC_BUDGET_BLOCKS
    pos_sync_multiplier: int = DEFAULT_POS_SYNC_MULTIPLIER
    users_per_chain: int = 16
    user_balance: int = 1_000_000
    amount_range: tuple[int, int] = (1, 10)
    crosschain_reward: int = DEFAULT_CROSSCHAIN_REWARD
    selection_accounts: tuple[str, ...] = ()
    threshold: Fraction = DEFAULT_THRESHOLD
    proposals: list[ScheduledProposal] = field(default_factory=list)
    rate_range: Optional[tuple[float, float]] = RATE_RANGE
    name: str = "scenario"

    def __post_init__(self):
        nodes = set(self.topology.nodes)
        for label, mapping in (("consensus", self.consensus), ("formats", self.formats)):
            if set(mapping) != nodes:
                raise ValueError(f"{label} must cover exactly the topology's blockchains")
        ids = [spec.format_id for spec in self.formats.values()]
        if len(set(ids)) != len(ids):
            raise ValueError("format ids must be distinct per blockchain")
        for w in self.workloads:
            if w.chain not in nodes:
                raise ValueError(f"workload on unknown blockchain {w.chain}")
            if w.rate < 0:
                raise ValueError("rates must be non-negative")
            if w.rate and self.rate_range and not self.rate_range[0] <= w.rate <= self.rate_range[1]:
                raise ValueError(f"rate {w.rate} tx/min outside {self.rate_range}")
        for p in self.pairs:
            a, b = p.chains
            if a == b or a not in nodes or b not in nodes:
                raise ValueError(f"bad paired injection chains {p.chains}")
        if self.duration_ticks < 0 or self.ticks_per_minute < 1:
            raise ValueError("duration_ticks must be >= 0 and ticks_per_minute >= 1")


def user_address(chain: int, i: int) -> str:
    return f"u{chain}-{i:02d}"


def build_world(scenario: Scenario) -> World:
    if not is_strongly_connected(scenario.topology):
        raise TopologyError("refusing to start: topology is not strongly connected")
    chains = {}
    for cid in sorted(scenario.topology.nodes):
        accounts = {user_address(cid, i): Account(scenario.user_balance) for i in range(scenario.users_per_chain)}
        chains[cid] = ChainState(
            cid,
            scenario.consensus[cid],
            scenario.formats[cid].format_id,
            scenario.node_counts.get(cid, 1),
            accounts,
            scenario.crosschain_reward,
        )
    return World(
        scenario.topology,
        chains,
        dict(scenario.formats),
        scenario.sync_period,
        scenario.sync_budget_blocks,
        scenario.pos_sync_multiplier,
    )


def inject_workload(scenario: Scenario, tick: int, rng: np.random.Generator) -> list[tuple[int, Transaction]]:
    """New transactions for ``tick``: Poisson streams, then paired injections."""
    out = []
    seq = itertools.count()
    lo, hi = scenario.amount_range
    n_users = scenario.users_per_chain
    for w in scenario.workloads:
        n = rng.poisson(w.rate / scenario.ticks_per_minute) if w.rate else 0
        if not n:
            continue
        spec = scenario.formats[w.chain]
        senders = rng.integers(0, n_users, size=n)
        offsets = rng.integers(1, n_users, size=n) if n_users > 1 else np.zeros(n, dtype=int)
        amounts = rng.integers(lo, hi + 1, size=n)
        for s, off, amt in zip(senders, offsets, amounts):
            tx = make_transaction(
                spec,
                user_address(w.chain, int(s)),
                user_address(w.chain, int((s + off) % n_users)),
                int(amt),
                kind=w.kind,
                origin_chain=w.chain,
                nonce=tick * 1_000_000 + next(seq),
            )
            out.append((w.chain, tx))
    for p in scenario.pairs:
        if p.tick != tick:
            continue
        a, b = p.chains
        tx_a = make_transaction(scenario.formats[a], user_address(a, 0), user_address(a, 1), p.amount,
                                origin_chain=a, nonce=tick * 1_000_000 + next(seq))
        tx_b = make_transaction(scenario.formats[b], user_address(b, 0), user_address(b, 1), p.amount,
                                origin_chain=b, nonce=tick * 1_000_000 + next(seq))
        out.append((a, replace(tx_a, dependency=(b, tx_b.origin_tx_id))))
        out.append((b, replace(tx_b, dependency=(a, tx_a.origin_tx_id))))
    return out


def step(world: World, scenario: Scenario, rng: np.random.Generator) -> None:
    """Advance ``world`` by one tick of ``scenario``."""
    for sp in scenario.proposals:
        if sp.tick == world.tick:
            result = world.apply_proposal(sp.proposal, scenario.selection_accounts)
            world.metrics.topology_changes.append(
                f"tick {world.tick}: proposal {result.target_edge} {result.status.value} {result.reason}".rstrip()
            )
    for cid, tx in inject_workload(scenario, world.tick, rng):
        world.chains[cid].submit(PendingTx(tx))
        world.metrics.injections.append(Injection(world.tick, cid, tx.tx_id, tx.kind.value))
    propagate_tick(world)
    settle_dependencies(world)


def simulate(scenario: Scenario) -> World:
    world = build_world(scenario)
    rng = np.random.default_rng(scenario.rng_seed)
    for tick in range(scenario.duration_ticks):
        world.tick = tick
        step(world, scenario, rng)
    world.metrics.duration_ticks = scenario.duration_ticks
    return world


def run(scenario: Scenario) -> MetricsLog:
    return simulate(scenario).metrics


@dataclass
class Report:
    mean_flow: dict[int, float]
    pair_sum: dict[tuple[int, int], np.ndarray]
    pair_diff: dict[tuple[int, int], np.ndarray]
    diff_slope: dict[tuple[int, int], float]
    latency: dict[str, int]
    copies: dict[str, int]
    mean_block_interval: dict[int, float]
    flow_ticks: np.ndarray
    warmup_ticks: int
    duplicates: int

    def to_text(self) -> str:
        lines = [f"warm-up ticks excluded: {self.warmup_ticks}", "", "chain  mean_flow_Bps  mean_block_interval"]
        for cid in sorted(self.mean_flow):
            lines.append(f"{cid:>5}  {self.mean_flow[cid]:>13.1f}  {self.mean_block_interval.get(cid, float('nan')):>19.2f}")
        if self.mean_flow:
            lo, hi = min(self.mean_flow.values()), max(self.mean_flow.values())
            lines.append(f"max/min mean flow: {hi / lo:.3f}" if lo else "max/min mean flow: n/a")
        for pair in sorted(self.pair_sum):
            a, b = pair
            lines.append(
                f"pair {a}+{b}: mean sum {self.pair_sum[pair].mean():.1f}, "
                f"mean diff {self.pair_diff[pair].mean():.1f}, diff slope {self.diff_slope[pair]:.3f} B/s per tick"
            )
        if self.latency:
            lat = np.array(list(self.latency.values()))
            lines.append(f"propagation latency (ticks, {lat.size} txs): mean {lat.mean():.2f}, max {lat.max()}")
        lines.append(f"duplicate sealed copies: {self.duplicates}")
        return "\n".join(lines) + "\n"


def summarize(
    log: MetricsLog,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION,
) -> Report:
    """Per-chain flow means, pair sum/difference series, latencies and block intervals.

    Flow of a chain per tick is ``bytes_out + bytes_in``.  Ticks in the first
    ``warmup_fraction`` of the run are ignored for flow and block statistics.
    Latency runs from a transaction's origin seal to its last sealed copy.
    """
    duration = log.duration_ticks or (max((f.tick for f in log.flows), default=-1) + 1)
    warmup = int(duration * warmup_fraction)
    chains = sorted({f.chain for f in log.flows})
    series = {c: np.zeros(max(duration - warmup, 0)) for c in chains}
    for f in log.flows:
        if f.tick >= warmup:
            series[f.chain][f.tick - warmup] = f.bytes_out + f.bytes_in
    mean_flow = {c: float(s.mean()) if s.size else 0.0 for c, s in series.items()}
    if pairs is None:
        pairs = list(itertools.combinations(chains, 2))
    ticks = np.arange(warmup, duration)
    pair_sum, pair_diff, slope = {}, {}, {}
    for a, b in pairs:
        pair_sum[(a, b)] = series[a] + series[b]
        pair_diff[(a, b)] = series[a] - series[b]
        slope[(a, b)] = float(np.polyfit(ticks, pair_diff[(a, b)], 1)[0]) if ticks.size > 1 else 0.0

    first, last = {}, {}
    seen = set()
    duplicates = 0
    copies: dict[str, int] = defaultdict(int)
    for e in log.events:
        key = (e.origin_tx_id, e.sealed_on)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        copies[e.origin_tx_id] += 1
        first.setdefault(e.origin_tx_id, e.tick)
        last[e.origin_tx_id] = e.tick
    latency = {t: last[t] - first[t] for t in first}

    intervals: dict[int, list[int]] = defaultdict(list)
    for b in log.blocks:
        if b.tick >= warmup:
            intervals[b.chain].append(b.interval)
    mean_interval = {c: float(np.mean(v)) for c, v in intervals.items()}
    return Report(mean_flow, pair_sum, pair_diff, slope, latency, dict(copies), mean_interval,
                  ticks, warmup, duplicates)
