"""One complete simulation run: wiring, traffic generation and the result record."""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import SimConfig
from .kernel import Kernel, RngStreams
from .metrics import Metrics, MetricsReport
from .mobility import RandomWaypoint
from .packets import Packet
from .protocols import make_protocol
from .radio import Radio


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int
    start: float
    stop: float
    rate: float

    def times(self):
        if self.rate <= 0:
            return []
        out = []
        k = 0
        while True:
            t = self.start + k / self.rate
            if t >= self.stop:
                return out
            out.append(t)
            k += 1


@dataclass
class SimResult:
    config: SimConfig
    report: MetricsReport
    violations: list
    trace_digest: str | None
    dropped: dict = field(default_factory=dict)
    events: int = 0

    @property
    def ok(self):
        return not self.violations


def make_flows(cfg, streams):
    """CBR flows between distinct random node pairs, drawn from the traffic stream."""
    if cfg.n < 2 or cfg.num_flows == 0:
        return []
    rng = streams.stream("traffic")
    stop = cfg.sim_time - cfg.traffic_stop_margin
    flows = []
    for _ in range(cfg.num_flows):
        src, dst = (int(x) for x in rng.choice(cfg.n, size=2, replace=False))
        start = cfg.traffic_start + float(rng.uniform(0.0, cfg.traffic_start_spread))
        flows.append(Flow(src, dst, start, stop, cfg.cbr_rate))
    return flows


class Simulation:
    """Kernel, mobility, radio, protocol and traffic for one configuration.

    Every random consumer draws from its own labelled substream, so all
    protocols run with identical trajectories and traffic for the same seed.
    """

    def __init__(self, cfg, positions=None, trace=False, protocol_trace=False, flows=None):
        self.cfg = cfg.validate()
        self.kernel = Kernel(trace=trace)
        self.streams = RngStreams(cfg.seed)
        self.metrics = Metrics()
        self.mobility = RandomWaypoint(self.kernel, cfg, self.streams, positions)
        self.radio = Radio(self.kernel, cfg, self.mobility, self.metrics,
                           self.streams.stream("loss"))
        self.protocol_trace = protocol_trace
        self.flows = make_flows(cfg, self.streams) if flows is None else list(flows)
        self._uid = 0
        self.protocol = make_protocol(cfg.protocol, self)
        self.radio.attach(self.protocol)
        self._started = False

    def new_packet(self, kind, src, dst, **kw):
        self._uid += 1
        if kind == "Data" and kw.get("size") is None:
            kw["size"] = self.cfg.data_size
        kw.setdefault("created", self.kernel.now)
        return Packet(kind, src, dst, self._uid, **kw)

    def start(self):
        if self._started:
            return
        self._started = True
        self.mobility.start()
        self.protocol.start()
        for f, flow in enumerate(self.flows):
            times = flow.times()
            if times:
                self.kernel.schedule(times[0], self._emit, f, times, 0, kind="traffic")

    def _emit(self, f, times, k):
        flow = self.flows[f]
        pkt = self.new_packet("Data", flow.src, flow.dst, info={"flow": f})
        self.metrics.generated(pkt)
        self.protocol.send_data(flow.src, pkt)
        if k + 1 < len(times):
            self.kernel.schedule(times[k + 1], self._emit, f, times, k + 1, kind="traffic")

    def run(self, until=None):
        self.start()
        self.kernel.run_until(self.cfg.sim_time if until is None else until)
        return self

    def finish(self):
        self.protocol.finish()
        violations = list(self.protocol.violations)
        radio_total = int(self.radio.tx_count.sum())
        if radio_total != self.metrics.total_tx:
            violations.append((self.kernel.now,
                               f"metrics count {self.metrics.total_tx} != radio count {radio_total}"))
        return SimResult(
            config=self.cfg,
            report=self.metrics.finalize(self.cfg.n),
            violations=violations,
            trace_digest=self.kernel.trace_digest,
            dropped=dict(sorted(self.protocol.dropped.items())),
            events=self.kernel.dispatched,
        )


def run_simulation(cfg, **kwargs):
    """Run ``cfg`` to ``sim_time`` and return its :class:`SimResult`."""
    sim = Simulation(cfg, **kwargs)
    sim.run()
    return sim.finish()
