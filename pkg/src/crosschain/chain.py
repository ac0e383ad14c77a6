"""Per-blockchain ledger: transactions, blocks, accounts and the sealed index."""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Iterator, Optional, Sequence

if TYPE_CHECKING:
    from .consensus import ConsensusConfig

ZERO_HASH = "0" * 64
GENESIS_SEALER = "genesis"
DEFAULT_CROSSCHAIN_REWARD = 1

CrossKey = tuple[int, str]


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class InvalidBlock(ValueError):
    """A block failed hash-chain or consensus validation."""


class TxKind(enum.Enum):
    INTERNAL = "internal"
    CROSS_CHAIN = "cross"


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    sender: str
    receiver: str
    amount: int
    kind: TxKind = TxKind.CROSS_CHAIN
    origin_chain: Optional[int] = None
    origin_tx_id: Optional[str] = None
    dependency: Optional[CrossKey] = None
    format_id: int = 0
    nonce: int = 0

    def __post_init__(self):
        if self.amount < 0:
            raise ValueError("amount must be non-negative")
        if self.dependency is not None:
            object.__setattr__(self, "dependency", (int(self.dependency[0]), str(self.dependency[1])))
        if self.kind is TxKind.INTERNAL and (self.origin_chain is not None or self.origin_tx_id is not None):
            raise ValueError("internal transactions carry no origin")

    @property
    def is_crosschain(self) -> bool:
        return self.kind is TxKind.CROSS_CHAIN

    @property
    def cross_key(self) -> CrossKey:
        return (self.origin_chain, self.origin_tx_id)

    @cached_property
    def canonical_bytes(self) -> bytes:
        """Format-neutral serialization used for block body hashing."""
        return json.dumps(
            [
                self.tx_id,
                self.sender,
                self.receiver,
                self.amount,
                self.kind.value,
                self.origin_chain,
                self.origin_tx_id,
                list(self.dependency) if self.dependency else None,
                self.format_id,
                self.nonce,
            ],
            separators=(",", ":"),
        ).encode()


def body_hash(txs: Iterable[Transaction]) -> str:
    h = hashlib.sha256()
    for tx in txs:
        data = tx.canonical_bytes
        h.update(len(data).to_bytes(4, "big"))
        h.update(data)
    return h.hexdigest()


def header_prefix(
    chain_id: int, height: int, prev_hash: str, timestamp: int, sealer: str, body: str
) -> bytes:
    return json.dumps(
        [chain_id, height, prev_hash, timestamp, sealer, body], separators=(",", ":")
    ).encode()


def hash_with_nonce(prefix: bytes, nonce: int) -> bytes:
    return hashlib.sha256(prefix + nonce.to_bytes(8, "big")).digest()


@dataclass(frozen=True)
class Block:
    chain_id: int
    height: int
    prev_hash: str
    timestamp: int
    transactions: tuple[Transaction, ...]
    sealer: str
    nonce: int = 0
    block_hash: str = ""

    @classmethod
    def make(cls, chain_id, height, prev_hash, timestamp, transactions, sealer, nonce=0) -> "Block":
        b = cls(chain_id, height, prev_hash, timestamp, tuple(transactions), sealer, nonce)
        return replace(b, block_hash=b.compute_hash())

    @cached_property
    def body_hash(self) -> str:
        return body_hash(self.transactions)

    def header_prefix(self) -> bytes:
        return header_prefix(
            self.chain_id, self.height, self.prev_hash, self.timestamp, self.sealer, self.body_hash,
        )

    def compute_hash(self) -> str:
        return hash_with_nonce(self.header_prefix(), self.nonce).hex()

    def hash_ok(self) -> bool:
        return self.block_hash == self.compute_hash()


def genesis_block(chain_id: int) -> Block:
    return Block.make(chain_id, 0, ZERO_HASH, 0, (), GENESIS_SEALER)


def links_ok(blocks: Sequence[Block], prev_hash: Optional[str] = None, prev_height: Optional[int] = None) -> bool:
    """Hash recomputation and parent links for a contiguous run of blocks."""
    for b in blocks:
        if not b.hash_ok():
            return False
        if prev_hash is not None and (b.prev_hash != prev_hash or b.height != prev_height + 1):
            return False
        prev_hash, prev_height = b.block_hash, b.height
    return True


def select_main_chain(candidates: Sequence[Sequence[Block]]) -> Sequence[Block]:
    """Longest internally valid chain; ties go to the smallest tip hash."""
    if not candidates:
        raise ValueError("no candidate chains")
    valid = [c for c in candidates if c and c[0].height == 0 and links_ok(c[1:], c[0].block_hash, 0) and c[0].hash_ok()]
    if not valid:
        raise ValueError("no valid candidate chain")
    return min(valid, key=lambda c: (-len(c), c[-1].block_hash))


@dataclass
class Account:
    balance: int = 0
    pos_weight: int = 0


@dataclass
class PendingTx:
    """A mempool entry; ``hops`` and ``source`` describe how a copy arrived."""

    tx: Transaction
    hops: int = 0
    source: Optional[int] = None
    foreign_verified: bool = False


@dataclass
class SealReport:
    block: Block
    debits: list[Transaction] = field(default_factory=list)
    credits: list[Transaction] = field(default_factory=list)
    internal: list[Transaction] = field(default_factory=list)
    copies: list[PendingTx] = field(default_factory=list)
    origins: list[PendingTx] = field(default_factory=list)
    reward: int = 0


@dataclass
class ChainState:
    chain_id: int
    consensus: "ConsensusConfig"
    format_id: int
    node_count: int = 1
    accounts: dict[str, Account] = field(default_factory=dict)
    crosschain_reward: int = DEFAULT_CROSSCHAIN_REWARD
    blocks: list[Block] = field(default_factory=list)
    mempool: dict = field(default_factory=dict)
    sealed_index: set = field(default_factory=set)
    escrow: dict[str, Transaction] = field(default_factory=dict)
    minted: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        if not self.blocks:
            self.blocks.append(genesis_block(self.chain_id))
        for address, asset in self.consensus.pos_accounts:
            acct = self.accounts.setdefault(address, Account())
            acct.balance += asset
            acct.pos_weight = self.consensus.weight_for_asset(asset)
        self.initial_supply = self.total_supply()

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    def balance(self, address: str) -> int:
        acct = self.accounts.get(address)
        return acct.balance if acct else 0

    def weights(self) -> dict[str, int]:
        return {a: acct.pos_weight for a, acct in self.accounts.items() if a in self.consensus.pos_roster}

    def total_supply(self) -> int:
        return sum(a.balance for a in self.accounts.values()) + sum(t.amount for t in self.escrow.values())

    def contains_crosschain(self, origin: int, origin_tx_id: str) -> bool:
        return (origin, origin_tx_id) in self.sealed_index

    def known(self, key: CrossKey) -> bool:
        """Sealed or waiting in the mempool."""
        return key in self.sealed_index or key in self.mempool

    def submit(self, entry: PendingTx) -> bool:
        tx = entry.tx
        key = tx.cross_key if tx.is_crosschain else ("internal", tx.tx_id)
        if key in self.mempool or (tx.is_crosschain and key in self.sealed_index):
            return False
        self.mempool[key] = entry
        return True

    def candidate_transactions(self) -> list[PendingTx]:
        """Mempool entries that can be sealed now, in arrival order.

        Origin transactions whose sender cannot cover the amount are skipped
        (and stay pending).
        """
        spend: dict[str, int] = {}
        out = []
        for entry in self.mempool.values():
            tx = entry.tx
            if tx.kind is TxKind.INTERNAL or tx.origin_chain == self.chain_id:
                need = spend.get(tx.sender, 0) + tx.amount
                if need > self.balance(tx.sender):
                    continue
                spend[tx.sender] = need
            out.append(entry)
        return out

    def append_block(self, block: Block, entries: Optional[Sequence[PendingTx]] = None) -> SealReport:
        """Validate and append ``block``; apply its ledger effects.

        ``entries`` carries mempool provenance for the block's transactions
        when the caller has it.  Raises :class:`InvalidBlock` and leaves the
        state untouched when the block is rejected.
        """
        tip = self.tip
        if block.chain_id != self.chain_id:
            raise InvalidBlock("block belongs to another chain")
        if block.prev_hash != tip.block_hash or block.height != tip.height + 1:
            raise InvalidBlock("block does not extend the tip")
        if not block.hash_ok():
            raise InvalidBlock("block hash does not match contents")
        if not self.consensus.check_block(block, self.weights()):
            raise InvalidBlock("block violates consensus rules")
        spend: dict[str, int] = {}
        seen: set = set()
        for tx in block.transactions:
            if tx.is_crosschain:
                if tx.cross_key in self.sealed_index or tx.cross_key in seen:
                    raise InvalidBlock(f"duplicate cross-chain transaction {tx.origin_tx_id[:12]}")
                seen.add(tx.cross_key)
            if tx.kind is TxKind.INTERNAL or tx.origin_chain == self.chain_id:
                spend[tx.sender] = spend.get(tx.sender, 0) + tx.amount
                if spend[tx.sender] > self.balance(tx.sender):
                    raise InvalidBlock(f"insufficient balance for {tx.sender}")

        by_key = {}
        for e in entries or ():
            by_key[e.tx.cross_key if e.tx.is_crosschain else ("internal", e.tx.tx_id)] = e
        report = SealReport(block)
        for tx in block.transactions:
            key = tx.cross_key if tx.is_crosschain else ("internal", tx.tx_id)
            entry = self.mempool.pop(key, None) or by_key.get(key) or PendingTx(tx)
            if tx.kind is TxKind.INTERNAL:
                self.accounts.setdefault(tx.sender, Account()).balance -= tx.amount
                self.accounts.setdefault(tx.receiver, Account()).balance += tx.amount
                report.internal.append(tx)
                continue
            self.sealed_index.add(tx.cross_key)
            if tx.origin_chain == self.chain_id:
                self.accounts.setdefault(tx.sender, Account()).balance -= tx.amount
                self.escrow[tx.origin_tx_id] = tx
                report.debits.append(tx)
                report.origins.append(entry)
            else:
                report.reward += self.crosschain_reward
                report.copies.append(entry)
        if report.reward:
            self.accounts.setdefault(block.sealer, Account()).balance += report.reward
            self.minted += report.reward
        self.consensus.after_seal(self, block)
        self.blocks.append(block)
        return report

    def release_escrow(self, origin_tx_id: str) -> Transaction:
        tx = self.escrow.pop(origin_tx_id)
        self.accounts.setdefault(tx.receiver, Account()).balance += tx.amount
        return tx

    def rebuild_sealed_index(self) -> set:
        return {tx.cross_key for b in self.blocks for tx in b.transactions if tx.is_crosschain}

    def verify_integrity(self) -> bool:
        return self.blocks[0].hash_ok() and links_ok(self.blocks[1:], self.blocks[0].block_hash, 0)

    def iter_crosschain(self) -> Iterator[tuple[Block, Transaction]]:
        for b in self.blocks:
            for tx in b.transactions:
                if tx.is_crosschain:
                    yield b, tx


def dump_chain(state: ChainState) -> str:
    """Line-delimited JSON export of blocks followed by balances."""
    lines = []
    for b in state.blocks:
        lines.append(json.dumps({
            "type": "block",
            "chain": b.chain_id,
            "height": b.height,
            "hash": b.block_hash,
            "prev": b.prev_hash,
            "tick": b.timestamp,
            "sealer": b.sealer,
            "nonce": b.nonce,
            "txs": [
                {
                    "id": t.tx_id, "kind": t.kind.value, "from": t.sender, "to": t.receiver,
                    "amount": t.amount, "origin": t.origin_chain, "origin_tx": t.origin_tx_id,
                    "dependency": list(t.dependency) if t.dependency else None,
                }
                for t in b.transactions
            ],
        }, sort_keys=True))
    for address in sorted(state.accounts):
        acct = state.accounts[address]
        lines.append(json.dumps({
            "type": "balance", "chain": state.chain_id, "account": address,
            "balance": acct.balance, "pos_weight": acct.pos_weight,
        }, sort_keys=True))
    return "\n".join(lines) + "\n"
