import json

import pytest

from xrelay import netsim


def make_net(nodes=("a", "b", "c"), matrix=None, **kwargs):
    topo = netsim.Topology(list(nodes), latency_seed=7, matrix=matrix)
    return netsim.Network(topo, **kwargs)


def fixed_matrix(nodes, value):
    return {a: {b: value for b in nodes if b != a} for a in nodes}


def test_send_delivers_after_latency():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 10.0))
    seen = []
    net.register_handler("b", lambda ev: seen.append((ev.now, ev.message, ev.sender)))
    net.send("a", "b", "hello")
    stats = net.run_until_idle()
    assert seen == [(10.0, "hello", "a")]
    assert stats.final_time == 10.0


def test_down_node_reports_failure_to_sender_at_delivery_time():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 10.0))
    failures = []
    net.register_handler(
        "a", lambda ev: failures.append((type(ev).__name__, ev.now, ev.receiver))
    )
    net.fail_node("b")
    net.send("a", "b", "msg")
    net.run_until_idle()
    assert failures == [("DeliveryFailure", 10.0, "b")]


def test_same_instant_sends_dispatch_in_send_order():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 5.0))
    order = []
    net.register_handler("b", lambda ev: order.append(ev.message))
    net.send("a", "b", 1)
    net.send("a", "b", 2)
    net.send("c", "b", 3)
    net.run_until_idle()
    assert order == [1, 2, 3]


def test_unknown_node_raises():
    net = make_net()
    with pytest.raises(netsim.UnknownNode):
        net.send("a", "zzz", "x")
    with pytest.raises(netsim.UnknownNode):
        net.fail_node("zzz")


def test_ping_semantics():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 7.0))
    assert net.ping("a", "b") == 14.0
    assert net.ping("a", "a") == 0.0
    net.fail_node("b")
    assert net.ping("a", "b") is netsim.UNREACHABLE
    net.restore_node("b")
    assert net.ping("a", "b") == 14.0


def test_chained_events_and_final_time():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 10.0))
    net.register_handler("b", lambda ev: net.send("b", "c", ev.message + 1))
    net.register_handler("c", lambda ev: None)
    net.send("a", "b", 0)
    stats = net.run_until_idle()
    assert stats.final_time == 20.0
    assert stats.events_dispatched == 2


def test_horizon_flag():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 10.0))
    net.register_handler("b", lambda ev: net.send("b", "c", "x"))
    net.send("a", "b", "x")
    stats = net.run_until_idle(max_virtual_time=15.0)
    assert stats.horizon_exceeded
    assert stats.final_time == 10.0
    stats2 = net.run_until_idle()
    assert not stats2.horizon_exceeded
    assert stats2.final_time == 20.0


def test_serial_server_throughput_shape():
    # One node with 2 ms service: k back-to-back messages finish 2 ms apart.
    topo = netsim.Topology(["src", "srv"], matrix=fixed_matrix(("src", "srv"), 1.0))
    net = netsim.Network(topo, service_times={"srv": 2.0})
    done = []
    net.register_handler("srv", lambda ev: done.append(ev.now))
    for _ in range(5):
        net.send("src", "srv", "job")
    net.run_until_idle()
    assert done == [3.0, 5.0, 7.0, 9.0, 11.0]


def test_latency_symmetric_and_deterministic():
    t1 = netsim.Topology(["a", "b", "c"], latency_seed=5)
    t2 = netsim.Topology(["a", "b", "c"], latency_seed=5)
    assert t1.latency("a", "b") == t2.latency("a", "b") == t1.latency("b", "a")
    assert 5.0 <= t1.latency("a", "b") <= 50.0
    t3 = netsim.Topology(["a", "b", "c"], latency_seed=6)
    assert t1.latency("a", "b") != t3.latency("a", "b")


def test_trace_determinism():
    def run():
        net = make_net(nodes=[f"n{i}" for i in range(6)])
        trace = []
        for i in range(6):
            net.register_handler(
                f"n{i}",
                lambda ev, i=i: (
                    trace.append((round(ev.now, 9), ev.receiver, ev.message)),
                    net.send(ev.receiver, f"n{(i + 1) % 6}", ev.message + 1)
                    if ev.message < 20
                    else None,
                ),
            )
        net.send("n0", "n1", 0)
        net.run_until_idle()
        return trace

    assert run() == run()


def test_json_topology_loader_with_failures():
    doc = {
        "nodes": ["a", "b", "c"],
        "matrix": fixed_matrix(("a", "b", "c"), 4.0),
        "failures": [{"node": "b", "at": 6.0}],
    }
    topo, failures = netsim.load_topology(json.dumps(doc))
    net = netsim.Network(topo)
    netsim.apply_failure_schedule(net, failures)
    outcomes = []
    net.register_handler("b", lambda ev: outcomes.append(("ok", ev.now)))
    net.register_handler("a", lambda ev: outcomes.append(("fail", ev.now)))
    net.send("a", "b", "early")   # arrives t=4, before failure
    net.at(5.0, lambda: net.send("a", "b", "late"))  # arrives t=9, after failure
    net.run_until_idle()
    assert outcomes == [("ok", 4.0), ("fail", 9.0)]


def test_failed_handler_never_invoked():
    net = make_net(matrix=fixed_matrix(("a", "b", "c"), 3.0))
    invoked = []
    net.register_handler("b", lambda ev: invoked.append(ev))
    net.fail_node("b")
    net.send("a", "b", "x")
    net.send("c", "b", "y")
    net.run_until_idle()
    assert invoked == []
