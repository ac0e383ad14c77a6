"""Append-only simulation records and their CSV form."""
from __future__ import annotations

import csv
import os
from dataclasses import astuple, dataclass, field, fields
from typing import Optional


@dataclass(frozen=True)
class FlowSample:
    tick: int
    chain: int
    bytes_out: int
    bytes_in: int


@dataclass(frozen=True)
class PropagationEvent:
    tick: int
    origin_chain: int
    origin_tx_id: str
    sealed_on: int
    hop_count: int = 0


@dataclass(frozen=True)
class BalanceRecord:
    tick: int
    chain: int
    account: str
    delta: int
    balance: int
    reason: str
    origin_tx_id: str = ""


@dataclass(frozen=True)
class BlockRecord:
    tick: int
    chain: int
    height: int
    block_hash: str
    sealer: str
    n_txs: int
    n_crosschain: int
    interval: int


@dataclass(frozen=True)
class ConfirmationCheck:
    """Both validations a sealed foreign copy went through."""

    tick: int
    chain: int
    source: int
    origin_chain: int
    origin_tx_id: str
    foreign_ok: bool
    local_ok: bool


@dataclass(frozen=True)
class Injection:
    tick: int
    chain: int
    origin_tx_id: str
    kind: str


@dataclass
class MetricsLog:
    flows: list[FlowSample] = field(default_factory=list)
    events: list[PropagationEvent] = field(default_factory=list)
    balances: list[BalanceRecord] = field(default_factory=list)
    blocks: list[BlockRecord] = field(default_factory=list)
    confirmations: list[ConfirmationCheck] = field(default_factory=list)
    injections: list[Injection] = field(default_factory=list)
    faults: list[str] = field(default_factory=list)
    topology_changes: list[str] = field(default_factory=list)
    duration_ticks: int = 0


# file name -> (attribute, record type, columns); propagation.csv omits hop_count
CSV_FILES = {
    "flow.csv": ("flows", FlowSample, ("tick", "chain", "bytes_out", "bytes_in")),
    "propagation.csv": ("events", PropagationEvent, ("tick", "origin_chain", "origin_tx_id", "sealed_on")),
    "balances.csv": ("balances", BalanceRecord,
                     ("tick", "chain", "account", "delta", "balance", "reason", "origin_tx_id")),
    "blocks.csv": ("blocks", BlockRecord,
                   ("tick", "chain", "height", "block_hash", "sealer", "n_txs", "n_crosschain", "interval")),
}


def write_csvs(log: MetricsLog, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, (attr, _, columns) in CSV_FILES.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for rec in getattr(log, attr):
                w.writerow([getattr(rec, c) for c in columns])
        written.append(path)
    return written


def read_csvs(out_dir: str) -> MetricsLog:
    log = MetricsLog()
    for name, (attr, cls, columns) in CSV_FILES.items():
        types = {f.name: f.type for f in fields(cls)}
        with open(os.path.join(out_dir, name), newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != columns:
                raise ValueError(f"{name}: unexpected columns {reader.fieldnames}")
            rows = getattr(log, attr)
            for row in reader:
                rows.append(cls(**{c: int(row[c]) if types[c] == "int" else row[c] for c in columns}))
    if log.flows:
        log.duration_ticks = max(f.tick for f in log.flows) + 1
    return log
