"""Per-blockchain transaction encodings and neighbour-to-neighbour translation.

Formats differ in field naming, field order and amount unit scale.  Each
blockchain only knows how to translate the formats of the blockchains it
directly connects to, so a registry holds one translator per topology edge.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

from .chain import Transaction, TxKind, sha256_hex
from .topology import TopologyGraph

CANONICAL_FIELDS = (
    "tx_id", "sender", "receiver", "amount", "kind",
    "origin_chain", "origin_tx_id", "dependency", "nonce",
)


class FormatError(ValueError):
    pass


class TransformRefused(FormatError):
    """The pair of formats is not registered (blockchains not directly connected)."""


@dataclass(frozen=True)
class FormatSpec:
    format_id: int
    field_order: tuple[str, ...] = CANONICAL_FIELDS
    field_names: Mapping[str, str] = field(default_factory=dict)
    amount_unit_scale: int = 1

    def __post_init__(self):
        order = tuple(self.field_order)
        names = {f: self.field_names.get(f, f) for f in CANONICAL_FIELDS}
        if sorted(order) != sorted(CANONICAL_FIELDS):
            raise FormatError("field_order must be a permutation of the canonical fields")
        extra = set(self.field_names) - set(CANONICAL_FIELDS)
        if extra:
            raise FormatError(f"unknown canonical fields {sorted(extra)}")
        if len(set(names.values())) != len(names):
            raise FormatError("local field names must be distinct")
        if self.amount_unit_scale < 1:
            raise FormatError("amount_unit_scale must be >= 1")
        object.__setattr__(self, "field_order", order)
        object.__setattr__(self, "field_names", MappingProxyType(names))

    def local(self, canonical: str) -> str:
        return self.field_names[canonical]


def identity_spec(format_id: int) -> FormatSpec:
    return FormatSpec(format_id)


def variant_spec(format_id: int) -> FormatSpec:
    """A deterministic, non-trivial format for ``format_id``.

    Field order is rotated, names get a per-format prefix and the amount
    unit scale cycles through 1, 10 and 100.
    """
    k = format_id % len(CANONICAL_FIELDS)
    order = CANONICAL_FIELDS[k:] + CANONICAL_FIELDS[:k]
    names = {f: f"f{format_id}_{f}" for f in CANONICAL_FIELDS}
    return FormatSpec(format_id, order, names, 10 ** (format_id % 3))


def _canonical_values(tx: Transaction) -> dict:
    return {
        "tx_id": tx.tx_id,
        "sender": tx.sender,
        "receiver": tx.receiver,
        "amount": tx.amount,
        "kind": tx.kind.value,
        "origin_chain": tx.origin_chain,
        "origin_tx_id": tx.origin_tx_id,
        "dependency": list(tx.dependency) if tx.dependency else None,
        "nonce": tx.nonce,
    }


def _emit(values: dict, spec: FormatSpec) -> bytes:
    out = {}
    for f in spec.field_order:
        v = values[f]
        if f == "amount":
            v = v * spec.amount_unit_scale
        out[spec.local(f)] = v
    return json.dumps(out, separators=(",", ":")).encode()


def _parse(data: bytes, spec: FormatSpec) -> dict:
    try:
        raw = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"undecodable transaction: {exc}") from None
    if list(raw) != [spec.local(f) for f in spec.field_order]:
        raise FormatError(f"payload does not match format {spec.format_id}")
    values = {f: raw[spec.local(f)] for f in CANONICAL_FIELDS}
    amount, rem = divmod(values["amount"], spec.amount_unit_scale)
    if rem:
        raise FormatError("amount is not a whole number of canonical units")
    values["amount"] = amount
    return values


def encode(tx: Transaction, spec: FormatSpec) -> bytes:
    return _emit(_canonical_values(tx), spec)


def decode(data: bytes, spec: FormatSpec) -> Transaction:
    v = _parse(data, spec)
    return Transaction(
        tx_id=v["tx_id"],
        sender=v["sender"],
        receiver=v["receiver"],
        amount=v["amount"],
        kind=TxKind(v["kind"]),
        origin_chain=v["origin_chain"],
        origin_tx_id=v["origin_tx_id"],
        dependency=tuple(v["dependency"]) if v["dependency"] else None,
        format_id=spec.format_id,
        nonce=v["nonce"],
    )


def translate(data: bytes, src: FormatSpec, dst: FormatSpec) -> bytes:
    """Rewrite an encoded transaction from ``src`` into ``dst`` without a Transaction in between."""
    return _emit(_parse(data, src), dst)


def content_id(tx: Transaction, spec: FormatSpec) -> str:
    """Hash of the local encoding with the id fields and dependency blanked.

    The dependency is excluded so that two transactions may reference each
    other; block hashes still bind it.  Blanking origin_tx_id lets a copy
    translated back into its origin format recover the original id.
    """
    return sha256_hex(encode(replace(tx, tx_id="", origin_tx_id=None, dependency=None), spec))


def make_transaction(
    spec: FormatSpec,
    sender: str,
    receiver: str,
    amount: int,
    *,
    kind: TxKind = TxKind.CROSS_CHAIN,
    origin_chain: Optional[int] = None,
    nonce: int = 0,
    dependency=None,
) -> Transaction:
    """Create an original transaction on its own chain with its content id assigned."""
    tx = Transaction("", sender, receiver, amount, kind, origin_chain if kind is TxKind.CROSS_CHAIN else None,
                     None, None, spec.format_id, nonce)
    tid = content_id(tx, spec)
    if kind is TxKind.CROSS_CHAIN:
        return replace(tx, tx_id=tid, origin_tx_id=tid, dependency=dependency)
    return replace(tx, tx_id=tid, dependency=dependency)


def canonical_projection(tx: Transaction) -> tuple:
    """Semantic content of a transaction, independent of its current format."""
    return (tx.sender, tx.receiver, tx.amount, tx.kind, tx.origin_chain, tx.origin_tx_id, tx.dependency, tx.nonce)


@dataclass(frozen=True)
class Transform:
    src: FormatSpec
    dst: FormatSpec

    def __call__(self, tx: Transaction) -> Transaction:
        out = decode(translate(encode(tx, self.src), self.src, self.dst), self.dst)
        return replace(out, tx_id=content_id(out, self.dst))


@dataclass(frozen=True)
class TransformRegistry:
    entries: Mapping[tuple[int, int], Transform]
    specs: Mapping[int, FormatSpec]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.entries


def registry_for(g: TopologyGraph, specs: Mapping[int, FormatSpec]) -> TransformRegistry:
    """One translator per edge: an observer translates its source's format into its own."""
    missing = sorted(n for n in g.nodes if n not in specs)
    if missing:
        raise FormatError(f"no format spec for blockchains {missing}")
    entries = {}
    for observer, source in g.sorted_edges():
        src, dst = specs[source], specs[observer]
        entries[(src.format_id, dst.format_id)] = Transform(src, dst)
    return TransformRegistry(MappingProxyType(entries), MappingProxyType(dict(specs)))


def transf(tx: Transaction, src: int, dst: int, reg: TransformRegistry) -> Transaction:
    if (src, dst) not in reg.entries:
        raise TransformRefused(f"no transform registered from format {src} to {dst}")
    if tx.format_id != src:
        raise FormatError(f"transaction is in format {tx.format_id}, not {src}")
    return reg.entries[(src, dst)](tx)


def transf_along(tx: Transaction, route: Sequence[int], reg: TransformRegistry) -> Transaction:
    """Fold :func:`transf` over consecutive chains of a data route."""
    for a, b in zip(route, route[1:]):
        tx = transf(tx, reg.specs[a].format_id, reg.specs[b].format_id, reg)
    return tx
