"""Simplified PoW and PoS: block validity and sealer selection."""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence, Union

from .chain import Block, ChainState, PendingTx, hash_with_nonce

DEFAULT_DIFFICULTY_BITS = 16
DEFAULT_MEAN_BLOCK_TICKS = 5
DEFAULT_POS_SLOT_TICKS = 5

Weights = Union[Mapping[str, int], Iterable[tuple[str, int]]]


class ConsensusKind(enum.Enum):
    POW = "pow"
    POS = "pos"


def leading_zero_bits(digest: bytes) -> int:
    n = 0
    for byte in digest:
        if byte:
            return n + 8 - byte.bit_length()
        n += 8
    return n


def _as_pairs(accounts: Weights) -> list[tuple[str, int]]:
    if isinstance(accounts, Mapping):
        return list(accounts.items())
    return [(a, w) for a, w in accounts]


@dataclass(frozen=True)
class ConsensusConfig:
    kind: ConsensusKind = ConsensusKind.POW
    pow_difficulty_bits: int = DEFAULT_DIFFICULTY_BITS
    nonce_budget: Optional[int] = None
    pos_accounts: tuple[tuple[str, int], ...] = ()
    pos_weight_decrement: Optional[int] = None
    pos_slot_ticks: int = DEFAULT_POS_SLOT_TICKS

    def __post_init__(self):
        object.__setattr__(self, "kind", ConsensusKind(self.kind))
        object.__setattr__(self, "pos_accounts", tuple((str(a), int(v)) for a, v in self.pos_accounts))
        if self.kind is ConsensusKind.POW and self.pow_difficulty_bits < 1:
            raise ValueError("PoW needs at least one difficulty bit")
        if self.kind is ConsensusKind.POS:
            if not self.pos_accounts:
                raise ValueError("PoS needs an account roster")
            if self.pos_slot_ticks < 1:
                raise ValueError("pos_slot_ticks must be positive")
            if any(v < 0 for _, v in self.pos_accounts):
                raise ValueError("PoS assets must be non-negative")
        if self.nonce_budget is not None and self.nonce_budget < 1:
            raise ValueError("nonce_budget must be positive")

    @property
    def budget(self) -> int:
        """Nonces tried per tick; default gives a mean block interval of ~5 ticks."""
        if self.nonce_budget is not None:
            return self.nonce_budget
        return max(1, (1 << self.pow_difficulty_bits) // DEFAULT_MEAN_BLOCK_TICKS)

    @cached_property
    def pos_roster(self) -> frozenset[str]:
        return frozenset(a for a, _ in self.pos_accounts)

    @staticmethod
    def weight_for_asset(asset: int) -> int:
        return asset

    @property
    def decrement(self) -> int:
        if self.pos_weight_decrement is not None:
            return self.pos_weight_decrement
        if not self.pos_accounts:
            return 1
        mean = sum(self.weight_for_asset(v) for _, v in self.pos_accounts) / len(self.pos_accounts)
        return max(1, int(mean // 4))

    def initial_weights(self) -> dict[str, int]:
        return {a: self.weight_for_asset(v) for a, v in self.pos_accounts}

    def check_block(self, block: Block, weights: Mapping[str, int]) -> bool:
        if self.kind is ConsensusKind.POW:
            return pow_verify(block, self.pow_difficulty_bits)
        return block.hash_ok() and bool(weights) and block.sealer == pos_select(weights)

    def after_seal(self, state: ChainState, block: Block) -> None:
        if self.kind is ConsensusKind.POS:
            acct = state.accounts[block.sealer]
            acct.pos_weight = max(0, acct.pos_weight - self.decrement)


def pow_mine(header: bytes, difficulty_bits: int, nonce_start: int, nonce_budget: int) -> Optional[int]:
    """First nonce in ``[nonce_start, nonce_start + nonce_budget)`` meeting the target."""
    if nonce_budget < 1:
        raise ValueError("nonce_budget must be at least 1")
    base = hashlib.sha256(header)
    full, rem = divmod(difficulty_bits, 8)
    mask = (0xFF << (8 - rem)) & 0xFF if rem else 0
    zero = bytes(full)
    for nonce in range(nonce_start, nonce_start + nonce_budget):
        h = base.copy()
        h.update(nonce.to_bytes(8, "big"))
        d = h.digest()
        if d[:full] == zero and not (rem and d[full] & mask):
            return nonce
    return None


def pow_verify(block: Block, difficulty_bits: int) -> bool:
    digest = hash_with_nonce(block.header_prefix(), block.nonce)
    return digest.hex() == block.block_hash and leading_zero_bits(digest) >= difficulty_bits


def pos_select(accounts: Weights) -> str:
    """Address with the largest weight; ties go to the smallest address."""
    pairs = _as_pairs(accounts)
    if not pairs:
        raise ValueError("no accounts to select from")
    if any(w < 0 for _, w in pairs):
        raise ValueError("weights must be non-negative")
    return min(pairs, key=lambda p: (-p[1], p[0]))[0]


def pos_update_after_seal(accounts: Weights, sealer: str, decrement: int) -> dict[str, int]:
    weights = dict(_as_pairs(accounts))
    if sealer not in weights:
        raise KeyError(f"unknown sealer {sealer!r}")
    weights[sealer] = max(0, weights[sealer] - decrement)
    return weights


def verify_foreign_block(
    block: Block, foreign: ConsensusConfig, weights: Optional[Mapping[str, int]] = None
) -> bool:
    """Check a neighbour's block under the neighbour's own consensus.

    PoS needs ``weights``: the roster weights replayed up to the block's
    parent.
    """
    try:
        if foreign.kind is ConsensusKind.POW:
            return pow_verify(block, foreign.pow_difficulty_bits)
        if weights is None:
            return False
        return block.hash_ok() and block.sealer == pos_select(weights)
    except (AttributeError, TypeError, ValueError, OverflowError):
        return False


def miner_address(chain_id: int) -> str:
    return f"miner-{chain_id}"


def try_seal(state: ChainState, tick: int, nonce_start: int) -> tuple[Optional[Block], list[PendingTx], int]:
    """One mining opportunity for ``state`` at ``tick``.

    Returns ``(block or None, entries sealed, next nonce_start)``.  PoW spends
    one nonce budget; PoS seals on slot ticks.  Nothing is sealed while no
    transaction can be included.
    """
    cfg = state.consensus
    entries = state.candidate_transactions()
    if not entries:
        return None, [], nonce_start
    txs = tuple(e.tx for e in entries)
    tip = state.tip
    if cfg.kind is ConsensusKind.POS:
        if tick % cfg.pos_slot_ticks:
            return None, [], nonce_start
        sealer = pos_select(state.weights())
        return Block.make(state.chain_id, tip.height + 1, tip.block_hash, tick, txs, sealer), entries, nonce_start

    sealer = miner_address(state.chain_id)
    draft = Block(state.chain_id, tip.height + 1, tip.block_hash, tick, txs, sealer)
    nonce = pow_mine(draft.header_prefix(), cfg.pow_difficulty_bits, nonce_start, cfg.budget)
    if nonce is None:
        return None, [], nonce_start + cfg.budget
    block = Block.make(state.chain_id, tip.height + 1, tip.block_hash, tick, txs, sealer, nonce)
    return block, entries, nonce + 1
