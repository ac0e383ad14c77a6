import numpy as np
import pytest
from scipy import stats

from crosschain.chain import TxKind
from crosschain.metrics import read_csvs, write_csvs
from crosschain.sim import PairedInjection, Scenario, Workload, inject_workload, run, simulate, summarize
from crosschain.topology import build_topology
from helpers import scenario


def test_rate_zero_injects_nothing():
    sc = scenario("ring", workloads=[Workload(1, 0)])
    rng = np.random.default_rng(0)
    assert all(inject_workload(sc, t, rng) == [] for t in range(50))


def test_poisson_arrivals_chi_square():
    sc = scenario("ring", workloads=[Workload(1, 3000)])
    rng = np.random.default_rng(2024)
    counts = np.array([len(inject_workload(sc, t, rng)) for t in range(10_000)])
    mean = 3000 / 60
    assert abs(counts.mean() - mean) < 4 * np.sqrt(mean / counts.size)
    # bins between Poisson quantiles, tails merged, each expecting >= 5 observations
    lo, hi = int(stats.poisson.ppf(0.001, mean)), int(stats.poisson.ppf(0.999, mean))
    edges = np.arange(lo, hi + 1)
    observed = [np.sum(counts < lo)] + [np.sum(counts == k) for k in edges] + [np.sum(counts > hi)]
    probs = [stats.poisson.cdf(lo - 1, mean)] + [stats.poisson.pmf(k, mean) for k in edges] + \
        [stats.poisson.sf(hi, mean)]
    expected = np.array(probs) * counts.size
    observed = np.array(observed)
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    _, p = stats.chisquare(obs, exp * obs.sum() / exp.sum())
    assert p > 0.001


def test_paired_injection():
    g = build_topology("ring", [1, 2, 3, 4])
    sc = scenario(g, pairs=[PairedInjection(2, (1, 3))])
    rng = np.random.default_rng(0)
    assert inject_workload(sc, 1, rng) == []
    out = inject_workload(sc, 2, rng)
    assert [c for c, _ in out] == [1, 3]
    (_, a), (_, b) = out
    assert a.dependency == (3, b.origin_tx_id) and b.dependency == (1, a.origin_tx_id)
    assert a.kind is b.kind is TxKind.CROSS_CHAIN


def test_scenario_validation():
    g = build_topology("ring", [1, 2, 3])
    with pytest.raises(ValueError):
        scenario(g, workloads=[Workload(1, 100)])
    with pytest.raises(ValueError):
        scenario(g, workloads=[Workload(9, 300)])
    with pytest.raises(ValueError):
        scenario(g, pairs=[PairedInjection(1, (1, 1))])
    scenario(g, workloads=[Workload(1, 150), Workload(2, 5000)])


def test_deterministic_and_seed_sensitive(tmp_path):
    sc = scenario("ring", duration=80, workloads=[Workload(1, 600), Workload(3, 600)], rng_seed=4)
    a, b = run(sc), run(sc)
    write_csvs(a, tmp_path / "a")
    write_csvs(b, tmp_path / "b")
    for name in ("flow.csv", "propagation.csv", "balances.csv", "blocks.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sc.rng_seed = 5
    write_csvs(run(sc), tmp_path / "c")
    assert (tmp_path / "a" / "propagation.csv").read_bytes() != (tmp_path / "c" / "propagation.csv").read_bytes()


def test_csv_round_trip(tmp_path):
    log = run(scenario("ring", duration=40, workloads=[Workload(2, 600)]))
    write_csvs(log, tmp_path)
    back = read_csvs(tmp_path)
    assert back.flows == log.flows and back.balances == log.balances and back.blocks == log.blocks
    assert [(e.tick, e.origin_chain, e.origin_tx_id, e.sealed_on) for e in back.events] == \
        [(e.tick, e.origin_chain, e.origin_tx_id, e.sealed_on) for e in log.events]


def test_summary_router_and_ring_properties():
    router = summarize(run(scenario("star", duration=200, workloads=[Workload(c, 600) for c in (1, 2, 3)])))
    hub, spokes = router.mean_flow[1], [router.mean_flow[2], router.mean_flow[3]]
    assert all(hub >= s for s in spokes)
    assert abs(hub - sum(spokes)) / hub <= 0.10
    # pair sum of the spokes tracks the hub tick by tick on average
    assert abs(router.pair_sum[(2, 3)].mean() - hub) / hub <= 0.10

    ring = summarize(run(scenario("ring", duration=200, workloads=[Workload(c, 600) for c in (1, 2, 3)])))
    assert max(ring.mean_flow.values()) / min(ring.mean_flow.values()) <= 1.5


@pytest.mark.parametrize("name,pair", [("s1_ring", (1, 2)), ("s1_ring", (2, 3)), ("s1_router", (2, 3))])
def test_difference_series_has_no_trend(run_preset, name, pair):
    world, _, _ = run_preset(name)
    rep = summarize(world.metrics)
    fit = stats.linregress(rep.flow_ticks, rep.pair_diff[pair])
    assert fit.slope == pytest.approx(rep.diff_slope[pair])
    assert fit.pvalue > 0.01
    scale = np.mean([rep.mean_flow[pair[0]], rep.mean_flow[pair[1]]])
    assert abs(fit.slope) * rep.flow_ticks.size < 0.10 * scale


def test_single_tx_latency_follows_hops():
    g = build_topology("ring", [1, 2, 3, 4])
    world = simulate(scenario(g, duration=120, pairs=[PairedInjection(1, (1, 2))]))
    rep = summarize(world.metrics)
    events = world.metrics.events
    for otx, lat in rep.latency.items():
        evs = sorted((e for e in events if e.origin_tx_id == otx), key=lambda e: e.tick)
        assert lat == evs[-1].tick - evs[0].tick
        assert rep.copies[otx] == 4
        # every hop needs at least one tick: sync happens before sealing
        assert lat >= max(e.hop_count for e in evs) == 3


def test_empty_run():
    log = run(scenario("ring", duration=0))
    rep = summarize(log)
    assert not log.flows and rep.duplicates == 0
