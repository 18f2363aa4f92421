"""Transmission counters and the per-run report."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .packets import CONTROL, classify


@dataclass(frozen=True)
class MetricsReport:
    n: int
    control_tx: dict
    data_tx: int
    flows_generated: int
    flows_delivered: int
    hop_counts: tuple = field(repr=False)
    latencies: tuple = field(repr=False)

    @property
    def control_tx_total(self):
        return sum(self.control_tx.values())

    @property
    def overhead_per_node(self):
        return self.control_tx_total / self.n

    @property
    def delivery_ratio(self):
        if self.flows_generated == 0:
            return 0.0
        return self.flows_delivered / self.flows_generated

    @property
    def mean_hops(self):
        return sum(self.hop_counts) / len(self.hop_counts) if self.hop_counts else 0.0

    @property
    def mean_latency(self):
        return sum(self.latencies) / len(self.latencies) if self.latencies else 0.0


class Metrics:
    """Live counters for one run.

    ``flows_generated``/``flows_delivered`` count end-to-end CBR data packets;
    each one is delivered at most once.
    """

    def __init__(self):
        self.control_tx = Counter()
        self.data_tx = 0
        self.flows_generated = 0
        self.flows_delivered = 0
        self.hop_counts = []
        self.latencies = []
        self._delivered = set()

    def record_tx(self, packet):
        cls = classify(packet.kind)
        if cls == CONTROL:
            self.control_tx[packet.kind] += 1
        else:
            self.data_tx += 1
        return cls

    @property
    def total_tx(self):
        return sum(self.control_tx.values()) + self.data_tx

    def generated(self, packet):
        self.flows_generated += 1

    def delivered(self, packet, now):
        if packet.uid in self._delivered:
            return False
        self._delivered.add(packet.uid)
        self.flows_delivered += 1
        self.hop_counts.append(packet.hops)
        self.latencies.append(now - packet.created)
        return True

    def finalize(self, n):
        if n <= 0:
            raise ValueError("node count must be positive")
        return MetricsReport(
            n=n,
            control_tx=dict(sorted(self.control_tx.items())),
            data_tx=self.data_tx,
            flows_generated=self.flows_generated,
            flows_delivered=self.flows_delivered,
            hop_counts=tuple(self.hop_counts),
            latencies=tuple(self.latencies),
        )
