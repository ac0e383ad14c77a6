from crosschain.consensus import ConsensusConfig, ConsensusKind
from crosschain.formats import variant_spec
from crosschain.sim import Scenario
from crosschain.topology import TopologyGraph, build_topology

POW8 = ConsensusConfig(pow_difficulty_bits=8)


def pos_config(n=4, slot=2):
    return ConsensusConfig(kind=ConsensusKind.POS, pos_accounts=tuple((f"v{i}", 100 + 10 * i) for i in range(n)),
                           pos_slot_ticks=slot)


def graph(edges, cap=4):
    nodes = {n for e in edges for n in e}
    return TopologyGraph(frozenset(nodes), frozenset(map(tuple, edges)), cap)


def scenario(g, duration=60, consensus=None, **kw):
    if isinstance(g, str):
        g = build_topology(g, [1, 2, 3], hub=1 if g == "star" else None)
    consensus = consensus or {}
    return Scenario(
        topology=g,
        consensus={c: consensus.get(c, POW8) for c in g.nodes},
        formats={c: variant_spec(c) for c in g.nodes},
        duration_ticks=duration,
        **kw,
    )
