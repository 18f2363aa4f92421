"""Small builders shared by the protocol tests."""

from collections import deque

import numpy as np

from ambrsim import SimConfig
from ambrsim.simulation import Simulation


def static_sim(positions, protocol="ambr", trace=False, **kw):
    """Frozen topology, no background traffic."""
    pos = np.asarray(positions, dtype=float)
    cfg = SimConfig(n=len(pos), v_min=0.0, v_max=0.0, protocol=protocol,
                    sim_time=kw.pop("sim_time", 1000.0), **kw)
    return Simulation(cfg, positions=pos, flows=[], protocol_trace=trace)


def actions(sim, action):
    return [row for row in sim.protocol.trace_rows if row[3] == action]


def line(k, spacing=200.0):
    return [(100.0 + i * spacing, 650.0) for i in range(k)]


def inject(sim, src, dst):
    """Hand one data packet to ``src`` now, as the traffic generator would."""
    pkt = sim.new_packet("Data", src, dst)
    sim.metrics.generated(pkt)
    sim.protocol.send_data(src, pkt)
    return pkt


def control(sim):
    return sum(sim.metrics.control_tx.values())


def adjacency(pos, r):
    pos = np.asarray(pos, dtype=float)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    adj = d2 <= r * r
    np.fill_diagonal(adj, False)
    return adj


def bfs_hops(adj, s):
    n = len(adj)
    dist = [None] * n
    dist[s] = 0
    q = deque([s])
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u]):
            if dist[v] is None:
                dist[v] = dist[u] + 1
                q.append(int(v))
    return dist


def connected_placement(n, side, r, seed):
    """Uniform placement in a square, resampled until the disk graph is connected."""
    rng = np.random.default_rng(seed)
    while True:
        pos = rng.uniform(0.0, side, (n, 2))
        if all(d is not None for d in bfs_hops(adjacency(pos, r), 0)):
            return pos


def teleport(sim, i, xy):
    """Move a frozen node instantly (static scenarios only)."""
    mob = sim.mobility
    mob.ox[i] = mob.tx[i] = xy[0]
    mob.oy[i] = mob.ty[i] = xy[1]


def ring(center, radius, k):
    """``k`` points evenly spaced on a circle."""
    ang = np.arange(k) * 2 * np.pi / k
    return [(center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)) for a in ang]
