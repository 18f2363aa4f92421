"""Machinery shared by every routing protocol."""

from __future__ import annotations


class InvariantViolation(AssertionError):
    """A protocol invariant failed during a run."""


class Protocol:
    """Base class: packet dispatch, delivery bookkeeping, tracing, invariants.

    Subclasses implement ``start``, ``send_data`` and one ``on_<Kind>``
    handler per packet kind they use, plus ``unicast_failed``.
    """

    name = "base"

    def __init__(self, sim):
        self.sim = sim
        self.cfg = sim.cfg
        self.kernel = sim.kernel
        self.radio = sim.radio
        self.metrics = sim.metrics
        self.n = sim.cfg.n
        self.rng = sim.streams.stream("protocol-jitter/" + self.name)
        self.violations = []
        self.trace_rows = [] if sim.protocol_trace else None
        self.dropped = {}
        self._handlers = {}

    # lifecycle

    def start(self):
        raise NotImplementedError

    def finish(self):
        pass

    # radio callbacks

    def receive(self, node, packet, sender):
        handler = self._handlers.get(packet.kind)
        if handler is None:
            handler = getattr(self, "on_" + packet.kind)
            self._handlers[packet.kind] = handler
        handler(node, packet, sender)

    def unicast_failed(self, node, target, packet):
        pass

    # traffic

    def send_data(self, src, packet):
        raise NotImplementedError

    # helpers

    @property
    def now(self):
        return self.kernel.now

    def packet(self, kind, src, dst, **kw):
        return self.sim.new_packet(kind, src, dst, **kw)

    def broadcast(self, node, packet):
        self.log(node, packet.kind, "send")
        return self.radio.broadcast(node, packet)

    def unicast(self, node, target, packet):
        self.log(node, packet.kind, "send")
        return self.radio.unicast(node, target, packet)

    def deliver(self, node, packet):
        if self.metrics.delivered(packet, self.now):
            self.log(node, "Data", "deliver")

    def drop(self, node, packet, reason):
        self.dropped[reason] = self.dropped.get(reason, 0) + 1
        self.log(node, packet.kind, "drop:" + reason)

    def log(self, node, kind, action):
        if self.trace_rows is not None:
            self.trace_rows.append((self.now, node, kind, action))

    def check(self, ok, message):
        if not ok:
            self.violations.append((self.now, message))

    def jitter(self, low, high):
        return float(self.rng.uniform(low, high))
