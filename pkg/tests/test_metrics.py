import pytest

from ambrsim import SimConfig
from ambrsim.simulation import Simulation
from ambrsim.metrics import Metrics
from ambrsim.packets import DATA, KINDS, Packet, classify
from ambrsim.protocols import REGISTRY


def pkt(kind):
    return Packet(kind, 0, 1, 0)


def test_hello_counts_as_control():
    m = Metrics()
    m.record_tx(pkt("Hello"))
    assert m.control_tx == {"Hello": 1} and m.data_tx == 0


def test_data_hop_counts_as_data():
    m = Metrics()
    m.record_tx(pkt("Data"))
    assert sum(m.control_tx.values()) == 0 and m.data_tx == 1


def test_keepalive_pair_is_two_control():
    m = Metrics()
    m.record_tx(pkt("MonitorAliveRequest"))
    m.record_tx(pkt("MonitorAliveReply"))
    assert sum(m.control_tx.values()) == 2


def test_overhead_per_node():
    assert Metrics().finalize(10).overhead_per_node == 0
    m = Metrics()
    for _ in range(500):
        m.record_tx(pkt("RREQ"))
    assert m.finalize(100).overhead_per_node == 5.0


def test_finalize_rejects_zero_nodes():
    with pytest.raises(ValueError):
        Metrics().finalize(0)


def test_delivery_counted_once():
    m = Metrics()
    p = pkt("Data")
    m.generated(p)
    assert m.delivered(p, 1.0) and not m.delivered(p, 2.0)
    assert m.finalize(2).delivery_ratio == 1.0


def test_classification_is_exhaustive():
    for kind in KINDS:
        classify(kind)
    assert classify("Data") == DATA
    with pytest.raises(KeyError):
        classify("Beacon")
    # every on_<Kind> handler of every protocol is a classified kind
    for cls in REGISTRY.values():
        for name in dir(cls):
            if name.startswith("on_") and name[3:4].isupper() and name != "on_node_up":
                assert name[3:] in KINDS, (cls.__name__, name)


@pytest.mark.parametrize("protocol", sorted(REGISTRY))
def test_report_reconciles_with_radio(protocol):
    sim = Simulation(SimConfig(n=20, sim_time=40, protocol=protocol, seed=2)).run()
    res = sim.finish()
    assert res.ok, res.violations
    r = res.report
    assert r.control_tx_total + r.data_tx == int(sim.radio.tx_count.sum()) > 0
    assert 0.0 <= r.delivery_ratio <= 1.0
