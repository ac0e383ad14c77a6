"""Inter-blockchain topology graphs.

An edge ``(a, b)`` means blockchain ``a`` directly connects to blockchain
``b``: ``a`` synchronizes ``b``'s chain of blocks, verifies it under ``b``'s
consensus and seals ``b``'s cross-chain transactions.  Cross-chain data
therefore travels *against* the edge direction.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional

DEFAULT_MAX_OUT_DEGREE = 4
DEFAULT_THRESHOLD = Fraction(2, 3)

Edge = tuple[int, int]


class TopologyError(ValueError):
    """Raised for malformed graphs or unknown blockchain ids."""


class ConnectionType(enum.Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"
    NOT_CONNECTED = "not_connected"


class TopologyKind(enum.Enum):
    RING = "ring"
    STAR = "star"
    FULL = "full"


@dataclass(frozen=True)
class TopologyGraph:
    nodes: frozenset[int]
    edges: frozenset[Edge]
    max_out_degree: int = DEFAULT_MAX_OUT_DEGREE

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        if self.max_out_degree < 1:
            raise TopologyError("max_out_degree must be positive")
        for a, b in self.edges:
            if a == b:
                raise TopologyError(f"self-edge on blockchain {a}")
            if a not in self.nodes or b not in self.nodes:
                raise TopologyError(f"edge ({a}, {b}) references an unknown blockchain")
        for n in self.nodes:
            if self.out_degree(n) > self.max_out_degree:
                raise TopologyError(
                    f"blockchain {n} has out-degree {self.out_degree(n)} > {self.max_out_degree}"
                )

    def successors(self, node: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == node)

    def predecessors(self, node: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == node)

    def out_degree(self, node: int) -> int:
        return sum(1 for a, _ in self.edges if a == node)

    def in_degree(self, node: int) -> int:
        return sum(1 for _, b in self.edges if b == node)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def _check(self, *ids: int) -> None:
        for i in ids:
            if i not in self.nodes:
                raise TopologyError(f"unknown blockchain id {i}")


def strongly_connected_components(g: TopologyGraph) -> list[frozenset[int]]:
    """Tarjan's algorithm, iterative so deep graphs do not hit the recursion limit."""
    adjacency = {n: g.successors(n) for n in g.nodes}
    index: dict[int, int] = {}
    lowlink: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[frozenset[int]] = []
    counter = 0

    for root in sorted(g.nodes):
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack.add(v)
            recurse = False
            succ = adjacency[v]
            while i < len(succ):
                w = succ[i]
                i += 1
                if w not in index:
                    work.append((v, i))
                    work.append((w, 0))
                    recurse = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if recurse:
                continue
            if lowlink[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                components.append(frozenset(comp))
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
    return components


def is_strongly_connected(g: TopologyGraph) -> bool:
    if not g.nodes:
        raise TopologyError("graph has no blockchains")
    return len(strongly_connected_components(g)) == 1


def _bfs_distances(g: TopologyGraph, source: int, reverse: bool = False) -> dict[int, int]:
    step = g.predecessors if reverse else g.successors
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in step(v):
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def reachable_from(g: TopologyGraph, source: int) -> set[int]:
    return set(_bfs_distances(g, source))


def unreachable_pairs(g: TopologyGraph) -> list[Edge]:
    """Every ordered pair (a, b), a != b, with no directed path a -> b."""
    out = []
    for a in sorted(g.nodes):
        seen = reachable_from(g, a)
        out.extend((a, b) for b in sorted(g.nodes) if b != a and b not in seen)
    return out


def classify_connection(g: TopologyGraph, a: int, b: int) -> ConnectionType:
    g._check(a, b)
    if a == b:
        raise TopologyError("a blockchain is not classified against itself")
    if (a, b) in g.edges:
        return ConnectionType.DIRECT
    if b in reachable_from(g, a):
        return ConnectionType.INDIRECT
    return ConnectionType.NOT_CONNECTED


def build_topology(
    kind: TopologyKind | str,
    ids: Iterable[int],
    hub: Optional[int] = None,
    max_out_degree: Optional[int] = None,
) -> TopologyGraph:
    """Build a ring, star (router) or fully connected topology.

    The ring closes over ``ids`` in the given order.  When ``max_out_degree``
    is omitted the cap is the default or the largest out-degree the shape
    needs, whichever is larger.
    """
    kind = TopologyKind(kind)
    ids = list(ids)
    if len(ids) < 2:
        raise TopologyError("a topology needs at least two blockchains")
    if len(set(ids)) != len(ids):
        raise TopologyError("duplicate blockchain ids")
    if kind is TopologyKind.RING:
        edges = {(ids[i], ids[(i + 1) % len(ids)]) for i in range(len(ids))}
    elif kind is TopologyKind.STAR:
        if hub is None or hub not in ids:
            raise TopologyError("star topology needs a hub among the ids")
        edges = set()
        for x in ids:
            if x != hub:
                edges.update({(hub, x), (x, hub)})
    else:
        edges = {(a, b) for a in ids for b in ids if a != b}
    needed = max(sum(1 for a, _ in edges if a == n) for n in ids)
    cap = max(DEFAULT_MAX_OUT_DEGREE, needed) if max_out_degree is None else max_out_degree
    return TopologyGraph(frozenset(ids), frozenset(edges), cap)


def propagation_path(g: TopologyGraph, start: int, end: int) -> list[int]:
    """Shortest directed path ``start -> ... -> end`` along graph edges.

    Among equally short paths the one taking the smallest next-hop id at each
    step wins.  Data originating on ``end`` reaches ``start`` by walking the
    returned path backwards.
    """
    g._check(start, end)
    if start == end:
        raise TopologyError("start and end must differ")
    to_end = _bfs_distances(g, end, reverse=True)
    if start not in to_end:
        raise TopologyError(f"no directed path from {start} to {end}")
    path = [start]
    while path[-1] != end:
        here = path[-1]
        path.append(min(w for w in g.successors(here) if to_end.get(w) == to_end[here] - 1))
    return path


def data_route(g: TopologyGraph, origin: int, dest: int) -> list[int]:
    """Chains visited by a cross-chain transaction travelling from origin to dest."""
    return list(reversed(propagation_path(g, dest, origin)))


def diameter(g: TopologyGraph) -> int:
    best = 0
    for a in g.nodes:
        dist = _bfs_distances(g, a)
        if len(dist) != len(g.nodes):
            return math.inf
        best = max(best, max(dist.values()))
    return best


class ProposalStatus(enum.Enum):
    PENDING = "pending"
    APPLIED = "applied"
    REJECTED = "rejected"


@dataclass(frozen=True)
class MembershipProposal:
    """A topology proposal transaction plus the agreement transactions it collected.

    ``remove`` turns the proposal into an edge removal.
    """

    proposer: str
    target_edge: Edge
    agreements: frozenset[str] = frozenset()
    threshold_fraction: Fraction = DEFAULT_THRESHOLD
    status: ProposalStatus = ProposalStatus.PENDING
    remove: bool = False
    reason: str = ""

    def __post_init__(self):
        object.__setattr__(self, "agreements", frozenset(self.agreements))
        object.__setattr__(self, "threshold_fraction", Fraction(self.threshold_fraction))
        object.__setattr__(self, "target_edge", tuple(self.target_edge))
        if not 0 < self.threshold_fraction <= 1:
            raise TopologyError("threshold_fraction must lie in (0, 1]")

    def agree(self, account: str) -> "MembershipProposal":
        return replace(self, agreements=self.agreements | {account})


def required_agreements(threshold: Fraction, n_accounts: int) -> int:
    return math.ceil(Fraction(threshold) * n_accounts)


def target_acceptable(g: TopologyGraph, edge: Edge) -> bool:
    """Hook for evaluating the target blockchain before connecting; always passes."""
    return True


def apply_membership(
    g: TopologyGraph,
    proposal: MembershipProposal,
    selection_accounts: Iterable[str],
) -> tuple[TopologyGraph, MembershipProposal]:
    """Resolve a pending proposal against the graph.

    Returns the (possibly unchanged) graph and the proposal with its final
    status.  Agreements from accounts outside ``selection_accounts`` are an
    input error.
    """
    accounts = frozenset(selection_accounts)
    if not accounts:
        raise TopologyError("no topology selection accounts configured")
    stray = proposal.agreements - accounts
    if stray:
        raise TopologyError(f"agreements from non-selection accounts: {sorted(stray)}")
    if proposal.status is not ProposalStatus.PENDING:
        return g, proposal

    def reject(reason: str):
        return g, replace(proposal, status=ProposalStatus.REJECTED, reason=reason)

    a, b = proposal.target_edge
    g._check(a, b)
    if len(proposal.agreements) < required_agreements(proposal.threshold_fraction, len(accounts)):
        return reject("agreement threshold not met")
    if proposal.remove:
        if (a, b) not in g.edges:
            return reject("edge not present")
        candidate = replace(g, edges=g.edges - {(a, b)})
    else:
        if a == b:
            return reject("self-edge")
        if (a, b) in g.edges:
            return reject("edge already present")
        if g.out_degree(a) + 1 > g.max_out_degree:
            return reject("out-degree cap exceeded")
        if not target_acceptable(g, (a, b)):
            return reject("target blockchain not acceptable")
        candidate = replace(g, edges=g.edges | {(a, b)})
    if not is_strongly_connected(candidate):
        return reject("result is not strongly connected")
    return candidate, replace(proposal, status=ProposalStatus.APPLIED)
