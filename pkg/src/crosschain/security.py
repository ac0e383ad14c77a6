"""Fake and detection probabilities for a transaction copied onto several chains.

With independent per-chain break probabilities ``p_i``, faking the
transaction everywhere has probability ``prod(p_i)``; an inconsistency is
visible unless either no chain or every chain was broken.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .metrics import PropagationEvent

LOG_SPACE_THRESHOLD = 30


def _select(ps: Mapping[int, float], chains: Optional[Iterable[int]]) -> list[float]:
    keys = list(ps) if chains is None else list(chains)
    if not keys:
        raise ValueError("chain subset must be non-empty")
    missing = [k for k in keys if k not in ps]
    if missing:
        raise KeyError(f"no break probability for chains {missing}")
    vals = [float(ps[k]) for k in keys]
    if any(not 0.0 <= v <= 1.0 for v in vals):
        raise ValueError("break probabilities must lie in [0, 1]")
    return vals


def _product(vals: Sequence[float]) -> float:
    if len(vals) <= LOG_SPACE_THRESHOLD:
        return math.prod(vals)
    if any(v == 0.0 for v in vals):
        return 0.0
    return math.exp(math.fsum(math.log(v) for v in vals))


def fake_probability(ps: Mapping[int, float], chains: Optional[Iterable[int]] = None) -> float:
    return _product(_select(ps, chains))


def intact_probability(ps: Mapping[int, float], chains: Optional[Iterable[int]] = None) -> float:
    return _product([1.0 - v for v in _select(ps, chains)])


def detect_probability(ps: Mapping[int, float], chains: Optional[Iterable[int]] = None) -> float:
    vals = _select(ps, chains)
    return 1.0 - _product([1.0 - v for v in vals]) - _product(vals)


def log10_fake_probability(ps: Mapping[int, float], chains: Optional[Iterable[int]] = None) -> float:
    vals = _select(ps, chains)
    if any(v == 0.0 for v in vals):
        return -math.inf
    return math.fsum(math.log10(v) for v in vals)


def confirmation_depth(trace: Iterable[PropagationEvent], origin_tx_id: str) -> int:
    """Number of distinct chains holding a sealed copy of the transaction."""
    return len({e.sealed_on for e in trace if e.origin_tx_id == origin_tx_id})


def verify_detection_by_sampling(
    ps: Mapping[int, float], chains: Optional[Iterable[int]] = None, trials: int = 100_000, seed: int = 0
) -> float:
    """Monte-Carlo estimate of the detection probability.

    Each trial breaks every chain independently; a trial counts as detected
    when some but not all chains were broken.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = np.asarray(_select(ps, chains))
    rng = np.random.default_rng(seed)
    broken = (rng.random((trials, p.size)) < p).sum(axis=1)
    return float(np.mean((broken > 0) & (broken < p.size)))


def security_table(ps: Mapping[int, float], sets: Iterable[Iterable[int]]) -> list[dict]:
    rows = []
    for chains in sets:
        chains = list(chains)
        rows.append({
            "chains": chains,
            "pb": fake_probability(ps, chains),
            "pf": detect_probability(ps, chains),
            "intact": intact_probability(ps, chains),
            "log10_pb": log10_fake_probability(ps, chains),
        })
    return rows
