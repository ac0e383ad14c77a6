"""Cross-chain data confirmed between PoW and PoS chains."""
# %%
from collections import Counter

from crosschain.config import load_preset, scenario_from_config
from crosschain.sim import simulate, summarize

scenario = scenario_from_config(load_preset("s2_ring"))
world = simulate(scenario)
kinds = {c: cfg.kind.value for c, cfg in scenario.consensus.items()}
print("consensus per chain:", kinds)

# %% each copy is checked under the source's rules and sealed under the observer's
pairs = Counter((kinds[c.source], kinds[c.chain]) for c in world.metrics.confirmations)
both = sum(c.foreign_ok and c.local_ok for c in world.metrics.confirmations)
print("copies by (source, sealer) consensus:", dict(pairs))
print(f"{both} of {len(world.metrics.confirmations)} copies passed both checks")

# %% the PoS chain rotates sealers as weights are spent
pos_chain = next(c for c, k in kinds.items() if k == "pos")
sealers = [b.sealer for b in world.chains[pos_chain].blocks[1:]]
print("first sealers:", sealers[:8])
print("distinct sealers:", len(set(sealers)))
print(summarize(world.metrics).to_text())
