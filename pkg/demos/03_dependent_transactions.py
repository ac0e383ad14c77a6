"""Two mutually dependent cross-chain transactions travelling round a 4-ring."""
# %%
from crosschain.config import load_preset, scenario_from_config
from crosschain.security import confirmation_depth
from crosschain.sim import simulate

world = simulate(scenario_from_config(load_preset("fig12_indirect")))
m = world.metrics

# %% where and when each transaction was sealed
for inj in m.injections:
    events = sorted((e for e in m.events if e.origin_tx_id == inj.origin_tx_id), key=lambda e: e.tick)
    route = " -> ".join(f"{e.sealed_on}@{e.tick}" for e in events)
    print(f"tx {inj.origin_tx_id[:10]} from chain {inj.chain}: {route} (depth {confirmation_depth(m.events, inj.origin_tx_id)})")

# %% senders pay at the origin seal; receivers wait for the partner transaction
for b in m.balances:
    if b.reason in ("debit", "credit"):
        print(f"tick {b.tick:>3} chain {b.chain} {b.reason:<6} {b.account} {b.delta:+d} -> {b.balance}")
