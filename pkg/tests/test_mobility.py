import numpy as np
import pytest

from ambrsim import SimConfig
from ambrsim.kernel import Kernel, RngStreams
from ambrsim.mobility import Leg, RandomWaypoint


def make(**kw):
    cfg = SimConfig(**kw).validate()
    k = Kernel()
    mob = RandomWaypoint(k, cfg, RngStreams(cfg.seed))
    mob.start()
    return k, mob


def test_linear_interpolation():
    leg = Leg(0, 10.0, 20.0, (0.0, 0.0), (100.0, 0.0), 10.0)
    assert leg.position(15.0) == (50.0, 0.0)


def test_paused_node_sits_on_waypoint():
    k, mob = make(n=3, pause=30.0)
    start = mob.positions().copy()
    for t in (0.0, 5.0, 29.9):
        for i in range(3):
            assert mob.position_at(i, t) == tuple(start[i])


def test_positions_stay_in_arena():
    k, mob = make(n=20, v_max=20.0, pause=1.0, seed=3)
    samples = []
    for t in np.linspace(0.5, 500.0, 500):
        k.run_until(float(t))
        samples.append(mob.positions())
    pts = np.concatenate(samples)
    assert len(pts) == 10_000
    assert pts.min() >= 0.0 and pts[:, 0].max() <= 1300.0 and pts[:, 1].max() <= 1300.0


def test_leg_invariants_and_speed_law():
    k, mob = make(n=50, v_min=1.0, v_max=10.0, pause=0.0, seed=4, area_width=200.0,
                  area_height=200.0)
    while mob.leg_count < 100_000:
        k.run_until(k.now + 50.0)
    legs = [leg for i in range(50) for leg in mob.moving_legs(i)]
    speeds = np.array([leg.speed for leg in legs])
    assert speeds.min() >= 1.0 and speeds.max() <= 10.0
    assert abs(speeds.mean() - 5.5) < 0.02 * 5.5
    for leg in legs[:2000]:
        dist = np.hypot(leg.target[0] - leg.origin[0], leg.target[1] - leg.origin[1])
        assert leg.arrive == pytest.approx(leg.depart + dist / leg.speed)


def test_degenerate_speed_interval():
    k, mob = make(n=5, v_min=7.0, v_max=7.0, pause=1.0)
    k.run_until(300)
    assert {leg.speed for i in range(5) for leg in mob.moving_legs(i)} == {7.0}


def test_tiny_arena_bounds():
    k, mob = make(n=4, area_width=1.0, area_height=1.0, pause=0.0)
    k.run_until(100)
    for i in range(4):
        for leg in mob.moving_legs(i):
            assert 0.0 <= leg.target[0] <= 1.0 and 0.0 <= leg.target[1] <= 1.0


def test_pause_length_matches_config():
    k, mob = make(n=3, pause=12.5)
    k.run_until(400)
    for i in range(3):
        pauses = [leg for leg in mob.legs[i] if leg.speed == 0 and np.isfinite(leg.arrive)]
        assert pauses and all(leg.arrive - leg.depart == pytest.approx(12.5) for leg in pauses)


def test_static_nodes_never_move():
    k, mob = make(n=6, v_min=0.0, v_max=0.0)
    start = mob.positions().copy()
    k.run_until(1000)
    assert np.array_equal(mob.positions(), start)
    assert mob.leg_count == 0


def test_trajectories_reproducible():
    a = make(n=8, seed=9)
    b = make(n=8, seed=9)
    a[0].run_until(200)
    b[0].run_until(200)
    assert np.array_equal(a[1].positions(), b[1].positions())
