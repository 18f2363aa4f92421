"""Idealized unit-disk radio: range test, airtime, optional random loss."""

from __future__ import annotations

import math

import numpy as np

DELIVER = "deliver"


class Radio:
    """Delivers packets between nodes through kernel events.

    A broadcast reaches every node within ``tx_range`` of the sender at the
    moment it starts; each copy is lost independently with ``loss_prob``.
    A unicast that is out of range or lost is reported back to the sender
    after the ack timeout. Each call to :meth:`broadcast` or :meth:`unicast`
    counts as exactly one transmission.
    """

    def __init__(self, kernel, cfg, mobility, metrics, loss_rng):
        self.kernel = kernel
        self.cfg = cfg
        self.mobility = mobility
        self.metrics = metrics
        self.loss_rng = loss_rng
        self.range = cfg.tx_range
        self.range2 = cfg.tx_range * cfg.tx_range
        self.tx_count = np.zeros(cfg.n, dtype=np.int64)
        self.handler = None

    def attach(self, handler):
        # handler.receive(node, packet, sender) / handler.unicast_failed(node, target, packet)
        self.handler = handler

    def airtime(self, size_bytes):
        return size_bytes * 8.0 / self.cfg.bandwidth

    def ack_timeout(self, packet):
        if self.cfg.ack_timeout is not None:
            return self.cfg.ack_timeout
        return 2.0 * self.airtime(packet.size) + 0.1

    def neighbors_of(self, node, t=None):
        """Nodes within range of ``node`` at time ``t`` (default: now)."""
        if t is None or t == self.kernel.now:
            pos = self.mobility.positions()
            d2 = ((pos - pos[node]) ** 2).sum(axis=1)
            d2[node] = np.inf
            return set(np.flatnonzero(d2 <= self.range2).tolist())
        x0, y0 = self.mobility.position_at(node, t)
        out = set()
        for u in range(self.cfg.n):
            if u == node:
                continue
            x, y = self.mobility.position_at(u, t)
            if (x - x0) ** 2 + (y - y0) ** 2 <= self.range2:
                out.add(u)
        return out

    def in_range(self, a, b):
        xa, ya = self.mobility.position(a)
        xb, yb = self.mobility.position(b)
        return (xa - xb) ** 2 + (ya - yb) ** 2 <= self.range2

    def distance(self, a, b):
        xa, ya = self.mobility.position(a)
        xb, yb = self.mobility.position(b)
        return math.hypot(xa - xb, ya - yb)

    def _lost(self, k):
        p = self.cfg.loss_prob
        if p <= 0.0:
            return np.zeros(k, dtype=bool)
        if p >= 1.0:
            return np.ones(k, dtype=bool)
        return self.loss_rng.random(k) < p

    def broadcast(self, sender, packet):
        self.tx_count[sender] += 1
        self.metrics.record_tx(packet)
        receivers = sorted(self.neighbors_of(sender))
        if receivers:
            lost = self._lost(len(receivers))
            receivers = [r for r, gone in zip(receivers, lost) if not gone]
        delay = self.airtime(packet.size) + self.cfg.propagation_delay
        if receivers:
            self.kernel.schedule_in(delay, self._deliver_all, receivers, packet, sender,
                                    kind="rx:" + packet.kind)
        return receivers

    def _deliver_all(self, receivers, packet, sender):
        recv = self.handler.receive
        for r in receivers:
            recv(r, packet, sender)

    def unicast(self, sender, target, packet):
        """Send to one neighbor; returns True if the frame will arrive."""
        self.tx_count[sender] += 1
        self.metrics.record_tx(packet)
        ok = target != sender and self.in_range(sender, target) and not self._lost(1)[0]
        if ok:
            delay = self.airtime(packet.size) + self.cfg.propagation_delay
            self.kernel.schedule_in(delay, self.handler.receive, target, packet, sender,
                                    kind="rx:" + packet.kind)
        else:
            self.kernel.schedule_in(self.ack_timeout(packet), self.handler.unicast_failed,
                                    sender, target, packet, kind="fail:" + packet.kind)
        return ok
