"""Random-waypoint movement inside a rectangular arena."""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Leg:
    """One trajectory segment; a pause is a leg with ``speed == 0``."""

    node: int
    depart: float
    arrive: float
    origin: tuple
    target: tuple
    speed: float

    def position(self, t):
        if self.speed == 0.0 or self.arrive <= self.depart:
            return self.target if t >= self.arrive else self.origin
        frac = min(max((t - self.depart) / (self.arrive - self.depart), 0.0), 1.0)
        return (
            self.origin[0] + (self.target[0] - self.origin[0]) * frac,
            self.origin[1] + (self.target[1] - self.origin[1]) * frac,
        )


class RandomWaypoint:
    """Continuous random-waypoint trajectories driven by kernel events.

    Each node starts paused at a uniform position for ``pause`` seconds, then
    alternates straight legs (uniform target, uniform speed in
    ``[v_min, v_max]``) with pauses. Every node draws from its own substream
    so trajectories do not depend on the order of other events.
    ``v_max == 0`` freezes all nodes.
    """

    def __init__(self, kernel, cfg, streams, positions=None):
        self.kernel = kernel
        self.cfg = cfg
        self.n = cfg.n
        self.width = cfg.area_width
        self.height = cfg.area_height
        self._rngs = [streams.stream("mobility", i) for i in range(self.n)]

        if positions is None:
            positions = np.array(
                [
                    (rng.uniform(0.0, self.width), rng.uniform(0.0, self.height))
                    for rng in self._rngs
                ],
                dtype=float,
            ).reshape(self.n, 2)
        else:
            positions = np.asarray(positions, dtype=float).reshape(self.n, 2)
        # current leg arrays, always valid at kernel.now
        self.ox = positions[:, 0].copy()
        self.oy = positions[:, 1].copy()
        self.tx = self.ox.copy()
        self.ty = self.oy.copy()
        self.depart = np.zeros(self.n)
        self.arrive = np.zeros(self.n)
        self.moving = np.zeros(self.n, dtype=bool)
        self.legs = [[] for _ in range(self.n)]
        self._starts = [[] for _ in range(self.n)]
        self.leg_count = 0

    def start(self):
        for i in range(self.n):
            self._begin_pause(i, self.kernel.now)

    # trajectory construction

    def _pause_length(self, i):
        p = self.cfg.pause
        if self.cfg.random_pause and p > 0:
            return float(self._rngs[i].uniform(0.0, 2.0 * p))
        return p

    def _record(self, leg):
        self.legs[leg.node].append(leg)
        self._starts[leg.node].append(leg.depart)

    def _begin_pause(self, i, t):
        x, y = float(self.tx[i]), float(self.ty[i])
        self.ox[i], self.oy[i] = x, y
        self.moving[i] = False
        self.depart[i] = t
        if self.cfg.static:
            self.arrive[i] = np.inf
            self._record(Leg(i, t, np.inf, (x, y), (x, y), 0.0))
            return
        dur = self._pause_length(i)
        self.arrive[i] = t + dur
        self._record(Leg(i, t, t + dur, (x, y), (x, y), 0.0))
        self.kernel.schedule(t + dur, self.next_leg, i, kind="mobility")

    def next_leg(self, i):
        """Pick a new uniform target and speed and schedule the arrival."""
        rng = self._rngs[i]
        now = self.kernel.now
        x0, y0 = float(self.tx[i]), float(self.ty[i])
        tx = float(rng.uniform(0.0, self.width))
        ty = float(rng.uniform(0.0, self.height))
        speed = float(rng.uniform(self.cfg.v_min, self.cfg.v_max))
        dist = float(np.hypot(tx - x0, ty - y0))
        arrive = now + dist / speed
        self.ox[i], self.oy[i] = x0, y0
        self.tx[i], self.ty[i] = tx, ty
        self.depart[i] = now
        self.arrive[i] = arrive
        self.moving[i] = True
        self.leg_count += 1
        self._record(Leg(i, now, arrive, (x0, y0), (tx, ty), speed))
        self.kernel.schedule(arrive, self._arrived, i, kind="mobility")

    def _arrived(self, i):
        self._begin_pause(i, self.kernel.now)

    # queries

    def positions(self):
        """All node positions at the current clock as an ``(n, 2)`` array."""
        t = self.kernel.now
        span = self.arrive - self.depart
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(self.moving & (span > 0), (t - self.depart) / span, 0.0)
        np.clip(frac, 0.0, 1.0, out=frac)
        x = self.ox + (self.tx - self.ox) * frac
        y = self.oy + (self.ty - self.oy) * frac
        return np.column_stack((x, y))

    def position(self, i):
        t = self.kernel.now
        if self.moving[i]:
            span = self.arrive[i] - self.depart[i]
            frac = 1.0 if span <= 0 else min(max((t - self.depart[i]) / span, 0.0), 1.0)
            return (
                self.ox[i] + (self.tx[i] - self.ox[i]) * frac,
                self.oy[i] + (self.ty[i] - self.oy[i]) * frac,
            )
        return (self.ox[i], self.oy[i])

    def position_at(self, i, t):
        """Position of node ``i`` at any already-generated time ``t``."""
        starts = self._starts[i]
        k = bisect.bisect_right(starts, t) - 1
        if k < 0:
            raise ValueError(f"t={t!r} precedes the trajectory of node {i}")
        leg = self.legs[i][k]
        if t > leg.arrive and k == len(starts) - 1:
            raise ValueError(f"t={t!r} is beyond the generated trajectory of node {i}")
        return leg.position(t)

    def moving_legs(self, i):
        return [leg for leg in self.legs[i] if leg.speed > 0]

    def dump_csv(self, fh):
        """Write one row per movement leg (pauses omitted)."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "depart", "origin_x", "origin_y", "target_x", "target_y", "speed"])
        for i in range(self.n):
            for leg in self.moving_legs(i):
                w.writerow([i, repr(leg.depart), repr(leg.origin[0]), repr(leg.origin[1]),
                            repr(leg.target[0]), repr(leg.target[1]), repr(leg.speed)])
