"""Flood-reactive (with and without local repair) and proactive baselines."""

from collections import Counter

import pytest

from ambrsim import SimConfig
from ambrsim.simulation import run_simulation

from helpers import adjacency, bfs_hops, connected_placement, inject, line, static_sim, teleport


def tx(sim):
    return Counter(sim.metrics.control_tx)


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_flood_line_discovery_costs(k):
    sim = static_sim(line(k), "flood-reactive")
    sim.run(1)
    inject(sim, 0, k - 1)
    sim.run(60)
    c = tx(sim)
    # source plus every intermediate node rebroadcasts once; the target does not
    assert c["RREQ"] == k - 1
    assert c["RREP"] == k - 1
    assert sim.metrics.flows_delivered == 1
    assert sim.protocol.routes[0][k - 1][:2] == [1, k - 1]


def test_flood_second_packet_reuses_route():
    sim = static_sim(line(4), "flood-reactive")
    inject(sim, 0, 3)
    sim.run(6)  # well inside the route timeout
    before = tx(sim)
    inject(sim, 0, 3)
    sim.run(12)
    assert tx(sim) == before
    assert sim.metrics.flows_delivered == 2


def test_flood_self_route():
    sim = static_sim(line(3), "flood-reactive")
    sim.run(1)
    assert sim.protocol.flood_route_discover(1, 1) == [1]
    assert sum(tx(sim).values()) == 0


def test_flood_disconnected_destination_fails_and_costs():
    pos = line(3) + [(1200, 1200)]
    sim = static_sim(pos, "flood-reactive")
    inject(sim, 0, 3)
    sim.run(60)
    tries = 1 + sim.cfg.rreq_retries
    assert tx(sim)["RREQ"] == tries * 3
    assert tx(sim)["RREP"] == 0
    assert sim.protocol.dropped == {"no-route": 1}
    assert sim.metrics.flows_delivered == 0


def test_flood_hop_bound_limits_the_flood():
    sim = static_sim(line(6), "flood-reactive", rreq_ttl=2, rreq_retries=0)
    inject(sim, 0, 5)
    sim.run(30)
    assert tx(sim)["RREQ"] == 2  # the source and the first relay only
    assert sim.metrics.flows_delivered == 0


def _broken_line(protocol, **kw):
    sim = static_sim(line(4), protocol, **kw)
    inject(sim, 0, 3)
    sim.run(6)
    assert sim.metrics.flows_delivered == 1
    teleport(sim, 3, (1250, 100))
    before = tx(sim)
    inject(sim, 0, 3)
    sim.run(40)
    return sim, tx(sim) - before


def test_flood_break_sends_rerr_to_source():
    sim, delta = _broken_line("flood-reactive")
    assert delta["RERR"] == 2          # holder 2 -> 1 -> 0
    assert delta["RREQ"] == 0          # nothing re-floods until the next packet
    assert sim.protocol.dropped == {"route-error": 1}
    assert 3 not in sim.protocol.routes[0]


def test_flood_local_repair_tries_short_flood_first():
    sim, delta = _broken_line("flood-reactive-lr")
    assert delta["RREQ"] >= 1          # short repair flood from the holder
    assert delta["RERR"] == 2          # then the error once repair failed
    assert sim.protocol.dropped == {"repair-failed": 1}


def test_flood_local_repair_recovers_around_break():
    # diamond: 0-1-2-4 breaks at 2 but 3 bridges 1 and 4
    pos = [(100, 650), (300, 650), (500, 650), (420, 820), (620, 760)]
    sim = static_sim(pos, "flood-reactive-lr")
    sim.protocol.routes[0][4] = [1, 3, 1e9]
    sim.protocol.routes[1][4] = [2, 2, 1e9]
    sim.protocol.routes[2][4] = [4, 1, 1e9]
    teleport(sim, 2, (1250, 100))
    inject(sim, 0, 4)
    sim.run(20)
    c = tx(sim)
    assert sim.metrics.flows_delivered == 1
    assert c["RERR"] == 0
    assert c["RREQ"] >= 1


def test_proactive_periodic_update_count():
    n, period, horizon = 6, 15.0, 150.0
    sim = static_sim(line(n), "proactive", triggered_updates=False, update_period=period)
    sim.run(horizon)
    assert tx(sim)["TableUpdate"] == n * horizon / period


def test_proactive_tick_returns_one_broadcast():
    sim = static_sim(line(3), "proactive")
    sim.run(1)
    before = tx(sim)["TableUpdate"]
    assert sim.protocol.proactive_tick(0) == 1
    assert tx(sim)["TableUpdate"] == before + 1


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_proactive_tables_match_bfs(seed):
    pos = connected_placement(20, 700, 250, seed)
    sim = static_sim(pos, "proactive", seed=seed)
    sim.run(120)
    adj = adjacency(pos, 250)
    for s in range(len(pos)):
        dist = bfs_hops(adj, s)
        table = sim.protocol.routing_table(s)
        assert {d: h for d, (_, h) in table.items()} == {
            d: h for d, h in enumerate(dist) if d != s
        }
        for d, (nxt, h) in table.items():
            assert adj[s, nxt]
            assert bfs_hops(adj, nxt)[d] == h - 1


def test_proactive_forgets_departed_node():
    sim = static_sim(line(4), "proactive", entry_timeout=30.0)
    sim.run(100)
    assert 3 in sim.protocol.routing_table(0)
    teleport(sim, 3, (1250, 100))
    sim.run(200)
    assert 3 not in sim.protocol.routing_table(0)
    inject(sim, 0, 3)
    sim.run(210)
    assert sim.protocol.dropped.get("no-route") == 1


@pytest.mark.parametrize("protocol", ["ambr", "flood-reactive", "flood-reactive-lr", "proactive"])
def test_single_node_runs_clean(protocol):
    cfg = SimConfig(n=1, protocol=protocol, sim_time=50.0)
    res = run_simulation(cfg)
    assert res.ok
    assert res.report.delivery_ratio == 0.0
