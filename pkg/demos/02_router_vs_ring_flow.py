"""Network flow of a router (star) topology against a ring of three chains."""
# %%
from crosschain.config import load_preset, scenario_from_config
from crosschain.sim import run, summarize

reports = {}
for name in ("s1_router", "s1_ring"):
    log = run(scenario_from_config(load_preset(name)))
    reports[name] = summarize(log, pairs=[(2, 3), (1, 2)])
    print(name)
    print(reports[name].to_text())

# %% the router carries what both spokes send and receive
router = reports["s1_router"]
hub = router.mean_flow[1]
spokes = router.mean_flow[2] + router.mean_flow[3]
print(f"hub {hub:.0f} B/tick vs spokes combined {spokes:.0f} B/tick ({abs(hub - spokes) / hub:.2%} apart)")

# %% per-tick difference of two spokes wanders around zero without a trend
diff = router.pair_diff[(2, 3)]
print(f"spoke difference: mean {diff.mean():.1f}, std {diff.std():.1f}, slope {router.diff_slope[(2, 3)]:.3f}")

# %% on the ring every chain is one observer and one source
flows = reports["s1_ring"].mean_flow
print("ring max/min:", round(max(flows.values()) / min(flows.values()), 3))
