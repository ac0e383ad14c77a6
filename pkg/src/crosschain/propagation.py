"""Confirmation-based propagation between directly connected blockchains.

Each tick every due edge ``(observer, source)`` pulls the source's new
blocks, checks them under the source's consensus, translates the
cross-chain transactions into the observer's format and queues the ones the
observer has not seen.  The observer then seals them with its own
consensus, after which its own observers pick them up in turn.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import consensus as cons
from .chain import Block, ChainState, CrossKey, InvalidBlock, PendingTx, Transaction, links_ok
from .formats import FormatSpec, TransformRefused, TransformRegistry, encode, registry_for, transf
from .metrics import (
    BalanceRecord,
    BlockRecord,
    ConfirmationCheck,
    FlowSample,
    MetricsLog,
    PropagationEvent,
)
from .topology import (
    MembershipProposal,
    ProposalStatus,
    TopologyError,
    TopologyGraph,
    apply_membership,
    is_strongly_connected,
)

log = logging.getLogger(__name__)

HEARTBEAT_BYTES = 64
BLOCK_OVERHEAD_BYTES = 8 + 32  # nonce + hash on the wire
DEFAULT_SYNC_BUDGET_BLOCKS = 4
DEFAULT_POS_SYNC_MULTIPLIER = 2


@dataclass
class SyncCursor:
    """How far ``observer`` has copied ``source``'s chain of blocks.

    ``fan_out`` is the number of observer nodes pulling each delta and
    ``max_blocks`` caps the blocks fetched per sync.  For PoS sources the
    cursor carries the replayed roster weights at ``last_seen_height``.
    """

    observer: int
    source: int
    last_seen_height: int = 0
    period_ticks: int = 1
    last_seen_hash: str = ""
    fan_out: int = 1
    max_blocks: Optional[int] = None
    pos_weights: Optional[dict[str, int]] = None

    def __post_init__(self):
        if self.period_ticks < 1:
            raise ValueError("period_ticks must be positive")

    def due(self, tick: int) -> bool:
        return tick % self.period_ticks == 0

    def advance(self, blocks: Sequence[Block], source_consensus: cons.ConsensusConfig) -> None:
        if not blocks:
            return
        if self.pos_weights is not None:
            self.pos_weights = replay_weights(blocks, source_consensus, self.pos_weights)
        if blocks[-1].height < self.last_seen_height:
            raise ValueError("cursor cannot move backwards")
        self.last_seen_height = blocks[-1].height
        self.last_seen_hash = blocks[-1].block_hash


def new_cursor(observer: ChainState, source: ChainState, period_ticks: int = 1,
               max_blocks: Optional[int] = None) -> SyncCursor:
    weights = source.consensus.initial_weights() if source.consensus.kind is cons.ConsensusKind.POS else None
    return SyncCursor(observer.chain_id, source.chain_id, 0, period_ticks, source.blocks[0].block_hash,
                      observer.node_count, max_blocks, weights)


def block_wire_size(block: Block, spec: FormatSpec) -> int:
    return len(block.header_prefix()) + BLOCK_OVERHEAD_BYTES + sum(len(encode(t, spec)) for t in block.transactions)


def sync_step(cursor: SyncCursor, source: ChainState, spec: FormatSpec,
              size_cache: Optional[dict] = None) -> tuple[list[Block], int]:
    """Blocks of ``source`` above the cursor and the bytes moved to fetch them.

    Does not move the cursor; call :meth:`SyncCursor.advance` once the delta
    has been validated.  An empty delta still costs a heartbeat.
    """
    start = cursor.last_seen_height + 1
    stop = len(source.blocks)
    if cursor.max_blocks is not None:
        stop = min(stop, start + cursor.max_blocks)
    blocks = source.blocks[start:stop]
    if not blocks:
        return [], HEARTBEAT_BYTES * cursor.fan_out
    total = 0
    for b in blocks:
        if size_cache is None:
            total += block_wire_size(b, spec)
        else:
            size = size_cache.get(b.block_hash)
            if size is None:
                size = size_cache[b.block_hash] = block_wire_size(b, spec)
            total += size
    return list(blocks), total * cursor.fan_out


def replay_weights(blocks: Sequence[Block], consensus: cons.ConsensusConfig,
                   weights: Mapping[str, int]) -> dict[str, int]:
    w = dict(weights)
    for b in blocks:
        w = cons.pos_update_after_seal(w, b.sealer, consensus.decrement)
    return w


def validate_copied_chain(
    blocks: Sequence[Block],
    source_consensus: cons.ConsensusConfig,
    prev_hash: Optional[str] = None,
    prev_height: Optional[int] = None,
    weights: Optional[Mapping[str, int]] = None,
) -> bool:
    """Every block links to its parent and passes the source's consensus check."""
    if not links_ok(blocks, prev_hash, prev_height):
        return False
    if source_consensus.kind is cons.ConsensusKind.POS:
        w = dict(weights) if weights is not None else source_consensus.initial_weights()
        for b in blocks:
            if not cons.verify_foreign_block(b, source_consensus, w):
                return False
            w = cons.pos_update_after_seal(w, b.sealer, source_consensus.decrement)
        return True
    return all(cons.verify_foreign_block(b, source_consensus) for b in blocks)


def extract_crosschain(blocks: Sequence[Block]) -> list[Transaction]:
    return [t for b in blocks for t in b.transactions if t.is_crosschain]


def confirm_and_seal(
    observer: ChainState,
    txs: Sequence[Transaction],
    reg: TransformRegistry,
    source_format: int,
    source_id: Optional[int] = None,
    source_hops: Optional[Mapping[CrossKey, int]] = None,
    faults: Optional[list[str]] = None,
) -> list[Transaction]:
    """Translate ``txs`` into the observer's format and queue the unseen ones.

    The copies are sealed later by the observer's own consensus.  Returns the
    queued copies.
    """
    queued = []
    for t in txs:
        key = t.cross_key
        if observer.known(key):
            continue
        try:
            copy = transf(t, source_format, observer.format_id, reg)
        except TransformRefused as exc:
            msg = f"chain {observer.chain_id}: {exc}"
            log.warning(msg)
            if faults is not None:
                faults.append(msg)
            continue
        hops = (source_hops.get(key, 0) if source_hops is not None else 0) + 1
        if observer.submit(PendingTx(copy, hops, source_id, foreign_verified=True)):
            queued.append(copy)
    return queued


@dataclass
class World:
    """All chains of one simulation plus the topology, registry and cursors."""

    topology: TopologyGraph
    chains: dict[int, ChainState]
    specs: dict[int, FormatSpec]
    sync_period: int = 1
    sync_budget_blocks: Optional[int] = DEFAULT_SYNC_BUDGET_BLOCKS
    pos_sync_multiplier: int = DEFAULT_POS_SYNC_MULTIPLIER
    metrics: MetricsLog = field(default_factory=MetricsLog)
    tick: int = 0

    def __post_init__(self):
        if set(self.chains) != set(self.topology.nodes):
            raise TopologyError("chains and topology nodes differ")
        if not is_strongly_connected(self.topology):
            raise TopologyError("topology is not strongly connected")
        self.registry = registry_for(self.topology, self.specs)
        self.cursors: dict[tuple[int, int], SyncCursor] = {}
        for edge in self.topology.sorted_edges():
            self._add_cursor(edge)
        self.nonce_counters = {c: 0 for c in self.chains}
        self.hops: dict[int, dict[CrossKey, int]] = {c: {} for c in self.chains}
        self.size_cache: dict[int, dict] = {c: {} for c in self.chains}
        self.last_block_tick = {c: 0 for c in self.chains}
        self._flow = {c: [0, 0] for c in self.chains}

    def _add_cursor(self, edge) -> None:
        observer, source = self.chains[edge[0]], self.chains[edge[1]]
        budget = self.sync_budget_blocks
        if budget is not None and observer.consensus.kind is cons.ConsensusKind.POS:
            budget *= self.pos_sync_multiplier
        self.cursors[edge] = new_cursor(observer, source, self.sync_period, budget)

    def apply_proposal(self, proposal: MembershipProposal, selection_accounts) -> MembershipProposal:
        """Resolve a topology proposal at the current tick boundary."""
        g, result = apply_membership(self.topology, proposal, selection_accounts)
        if result.status is ProposalStatus.APPLIED:
            self.topology = g
            self.registry = registry_for(g, self.specs)
            edge = tuple(result.target_edge)
            if result.remove:
                self.cursors.pop(edge, None)
            else:
                self._add_cursor(edge)
        return result

    def _sync_edge(self, edge) -> None:
        cursor = self.cursors[edge]
        if not cursor.due(self.tick):
            return
        observer, source = self.chains[cursor.observer], self.chains[cursor.source]
        blocks, nbytes = sync_step(cursor, source, self.specs[source.chain_id], self.size_cache[source.chain_id])
        self._flow[source.chain_id][0] += nbytes
        self._flow[observer.chain_id][1] += nbytes
        if not blocks:
            return
        if not validate_copied_chain(blocks, source.consensus, cursor.last_seen_hash,
                                     cursor.last_seen_height, cursor.pos_weights):
            msg = f"tick {self.tick}: chain {observer.chain_id} rejected delta from {source.chain_id}"
            log.warning(msg)
            self.metrics.faults.append(msg)
            return
        cursor.advance(blocks, source.consensus)
        src = source.chain_id
        confirm_and_seal(observer, extract_crosschain(blocks), self.registry,
                         source.format_id, src, self.hops[src], self.metrics.faults)

    def _mine(self, cid: int) -> None:
        state = self.chains[cid]
        block, entries, self.nonce_counters[cid] = cons.try_seal(state, self.tick, self.nonce_counters[cid])
        if block is None:
            return
        local_ok = state.consensus.check_block(block, state.weights())
        try:
            report = state.append_block(block, entries)
        except InvalidBlock as exc:
            self.metrics.faults.append(f"tick {self.tick}: chain {cid} sealed invalid block: {exc}")
            return
        m = self.metrics
        for e in report.origins:
            tx = e.tx
            self.hops[cid][tx.cross_key] = 0
            m.events.append(PropagationEvent(self.tick, cid, tx.origin_tx_id, cid, 0))
            m.balances.append(BalanceRecord(self.tick, cid, tx.sender, -tx.amount,
                                            state.balance(tx.sender), "debit", tx.origin_tx_id))
        for e in report.copies:
            tx = e.tx
            self.hops[cid][tx.cross_key] = e.hops
            m.events.append(PropagationEvent(self.tick, tx.origin_chain, tx.origin_tx_id, cid, e.hops))
            m.confirmations.append(ConfirmationCheck(self.tick, cid, e.source if e.source is not None else -1,
                                                     tx.origin_chain, tx.origin_tx_id,
                                                     e.foreign_verified, local_ok))
        for tx in report.internal:
            m.balances.append(BalanceRecord(self.tick, cid, tx.sender, -tx.amount,
                                            state.balance(tx.sender), "internal_debit", tx.tx_id))
            m.balances.append(BalanceRecord(self.tick, cid, tx.receiver, tx.amount,
                                            state.balance(tx.receiver), "internal_credit", tx.tx_id))
        if report.reward:
            m.balances.append(BalanceRecord(self.tick, cid, block.sealer, report.reward,
                                            state.balance(block.sealer), "reward", ""))
        n_cross = len(report.origins) + len(report.copies)
        m.blocks.append(BlockRecord(self.tick, cid, block.height, block.block_hash, block.sealer,
                                    len(block.transactions), n_cross, self.tick - self.last_block_tick[cid]))
        self.last_block_tick[cid] = self.tick

    def flush_flows(self) -> None:
        for cid in sorted(self.chains):
            out, inn = self._flow[cid]
            self.metrics.flows.append(FlowSample(self.tick, cid, out, inn))
            self._flow[cid] = [0, 0]


def propagate_tick(world: World) -> World:
    """Due syncs on every edge, then one mining opportunity per chain.

    Edges and chains are processed in id order so runs are reproducible.
    Flow samples for the tick are emitted at the end.
    """
    for edge in sorted(world.cursors):
        world._sync_edge(edge)
    for cid in sorted(world.chains):
        world._mine(cid)
    world.flush_flows()
    return world


def settle_dependencies(world: World) -> World:
    """Release escrowed cross-chain payments whose dependency has arrived.

    A payment without a dependency is released at the first pass after its
    seal.
    """
    for cid in sorted(world.chains):
        state = world.chains[cid]
        for otx, tx in list(state.escrow.items()):
            if tx.dependency is not None and not state.contains_crosschain(*tx.dependency):
                continue
            state.release_escrow(otx)
            world.metrics.balances.append(BalanceRecord(world.tick, cid, tx.receiver, tx.amount,
                                                        state.balance(tx.receiver), "credit", otx))
    return world
