"""Building topologies, checking strong connectivity and changing connections."""
# %%
from fractions import Fraction

from crosschain.topology import (
    MembershipProposal,
    TopologyGraph,
    apply_membership,
    build_topology,
    classify_connection,
    data_route,
    is_strongly_connected,
    propagation_path,
    unreachable_pairs,
)

ring = build_topology("ring", [1, 2, 3, 4])
star = build_topology("star", [1, 2, 3], hub=1)
print("ring edges:", ring.sorted_edges())
print("star edges:", star.sorted_edges())
print("both strongly connected:", is_strongly_connected(ring), is_strongly_connected(star))

# %% a star with only outgoing hub edges leaves spokes unable to reach anyone
one_way = TopologyGraph(frozenset({1, 2, 3}), frozenset({(1, 2), (1, 3)}))
print("one-way star connected:", is_strongly_connected(one_way))
print("unreachable pairs:", unreachable_pairs(one_way))

# %% connection types and routes on the 4-ring
for pair in [(1, 2), (1, 3)]:
    print(pair, classify_connection(ring, *pair).value)
print("path 3 -> 1:", propagation_path(ring, 3, 1))
# an edge a->b means a synchronizes b, so data from 3 travels the other way
print("data from 3 reaches 1 via:", data_route(ring, 3, 1))

# %% adding a direct connection by proposal and agreement
selection = ["sel-a", "sel-b", "sel-c", "sel-d"]
p = MembershipProposal("sel-a", (1, 3), threshold_fraction=Fraction(2, 3)).agree("sel-a").agree("sel-b")
g, result = apply_membership(ring, p, selection)
print("two of four agree:", result.status.value, result.reason)
g, result = apply_membership(ring, p.agree("sel-c"), selection)
print("three of four agree:", result.status.value, "new edge present:", (1, 3) in g.edges)
