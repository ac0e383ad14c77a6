"""A bridge chain with no workload of its own joins two rings."""
# %%
from collections import defaultdict

from crosschain.config import load_preset, scenario_from_config
from crosschain.sim import simulate, summarize

scenario = scenario_from_config(load_preset("bridge_join"))
world = simulate(scenario)
print("edges:", scenario.topology.sorted_edges())

# %% every transaction ends up on all six chains, the bridge included
# transactions from the last minute are still in flight when the run stops
cutoff = scenario.duration_ticks - 60
first, held = {}, defaultdict(set)
for e in world.metrics.events:
    first.setdefault(e.origin_tx_id, e.tick)
    if first[e.origin_tx_id] < cutoff:
        held[e.origin_tx_id].add(e.sealed_on)
depths = defaultdict(int)
for chains in held.values():
    depths[len(chains)] += 1
print("copies per transaction:", dict(sorted(depths.items())))

# %% the bridge relays both sides, so its flow is the largest
flows = summarize(world.metrics).mean_flow
for c in sorted(flows):
    print(f"chain {c}: {flows[c]:.0f} B/tick")
