import math

import numpy as np
import pytest

from iaqsim.network import (
    LinkParams, Message, Role, RoutingError, Topology, attempt_delivery, route_upward, send_request,
    send_to_sink, validate_topology,
)
from iaqsim.rng import seed_stream

C, R, E = Role.COORDINATOR, Role.ROUTER, Role.END_DEVICE


def tree(p=1.0, latency=0.05):
    """sink <- office (router) <- kitchen, bedroom (end devices)."""
    link = LinkParams(p, latency)
    return Topology(
        roles={"sink": C, "office": R, "kitchen": E, "bedroom": E},
        parent={"office": "sink", "kitchen": "office", "bedroom": "office"},
        links={"office": link, "kitchen": link, "bedroom": link},
    )


def rngs(topo, seed=1):
    return {c: seed_stream(seed, "link", c) for c in topo.parent}


def test_chain_of_three_routers_is_valid():
    topo = Topology({"c": C, "r1": R, "r2": R, "r3": R}, {"r1": "c", "r2": "r1", "r3": "r2"})
    assert validate_topology(topo) == []


def test_end_device_as_parent_rejected():
    topo = Topology({"c": C, "e": E, "x": E}, {"e": "c", "x": "e"})
    assert any("end_device" in v for v in validate_topology(topo))


def test_two_coordinators_rejected():
    topo = Topology({"c1": C, "c2": C, "r": R}, {"r": "c1"})
    assert any("multiple coordinators" in v for v in validate_topology(topo))


def test_other_structural_violations():
    assert validate_topology(Topology({"r": R}, {}))
    assert validate_topology(Topology({"c": C, "r": R}, {"r": "ghost"}))
    cyc = validate_topology(Topology({"c": C, "a": R, "b": R}, {"a": "b", "b": "a"}))
    assert any("cycle" in v for v in cyc)
    bad = Topology({"c": C, "r": R}, {"r": "c"}, {"r": LinkParams(1.5)})
    assert any("delivery_probability" in v for v in validate_topology(bad))


def test_routes():
    topo = tree()
    assert route_upward(topo, "sink") == ["sink"]
    assert route_upward(topo, "office") == ["office", "sink"]
    assert route_upward(topo, "kitchen") == ["kitchen", "office", "sink"]
    with pytest.raises(RoutingError):
        route_upward(topo, "attic")


def test_certain_and_impossible_links():
    g = np.random.default_rng(0)
    assert all(attempt_delivery(LinkParams(1.0), g)[0] for _ in range(1000))
    assert not any(attempt_delivery(LinkParams(0.0), g)[0] for _ in range(1000))
    assert attempt_delivery(LinkParams(1.0, 0.2), g)[1] == 0.2


def test_two_hop_monte_carlo():
    topo = tree(p=0.9)
    streams = rngs(topo, 2024)
    n = 100_000
    ok = sum(send_to_sink(topo, Message("kitchen", i, "aggregate"), streams).delivered for i in range(n))
    assert abs(ok / n - 0.81) <= 0.01


@pytest.mark.parametrize("p", [0.5, 0.88, 0.97])
@pytest.mark.parametrize("origin,hops", [("office", 1), ("kitchen", 2)])
def test_delivery_converges_to_p_power_hops(p, origin, hops):
    topo = tree(p=p)
    streams = rngs(topo, 99)
    n = 20_000
    ok = sum(send_to_sink(topo, Message(origin, i, "aggregate"), streams).delivered for i in range(n))
    want = p ** hops
    se = math.sqrt(want * (1 - want) / n)
    assert abs(ok / n - want) <= 3 * se


def test_lossless_latency_is_hop_sum():
    topo = tree(latency=0.05)
    m = Message("kitchen", 1, "aggregate", created_at=100.0)
    out = send_to_sink(topo, m, rngs(topo))
    assert out.delivered
    assert out.delivered_at == pytest.approx(100.1)
    assert m.delivered_at == out.delivered_at
    assert m.hop_path_so_far == ["kitchen", "office", "sink"]


def test_first_hop_loss():
    topo = tree()
    topo.links["kitchen"] = LinkParams(0.0)
    out = send_to_sink(topo, Message("kitchen", 1, "aggregate"), rngs(topo))
    assert not out.delivered
    assert out.lost_at_hop == 1 and out.reason == "link"
    assert out.delivered_at is None


def test_sleeping_router_drops_aggregate_but_not_alert():
    topo = tree()
    asleep = lambda node, t: False  # noqa: E731
    agg = send_to_sink(topo, Message("kitchen", 1, "aggregate"), rngs(topo), asleep)
    alert = send_to_sink(topo, Message("kitchen", 2, "alert"), rngs(topo), asleep)
    assert not agg.delivered and agg.reason == "asleep" and agg.lost_at_hop == 1
    assert alert.delivered


def test_coordinator_always_receives():
    topo = tree()
    asleep = lambda node, t: False  # noqa: E731
    assert send_to_sink(topo, Message("office", 1, "aggregate"), rngs(topo), asleep).delivered


def test_request_last_hop_to_end_device_is_held():
    topo = tree()
    awake_office = lambda node, t: node == "office"  # noqa: E731
    m = Message("sink", 1, "request", target="kitchen")
    out = send_request(topo, m, rngs(topo), awake_office)
    assert out.delivered
    assert out.path == ["sink", "office", "kitchen"]
    out = send_request(topo, Message("sink", 2, "request", target="office"), rngs(topo), lambda n, t: False)
    assert not out.delivered and out.reason == "asleep"


def test_one_uniform_per_hop():
    topo = tree(p=0.5)
    streams = rngs(topo, 3)
    twin = rngs(topo, 3)
    send_to_sink(topo, Message("kitchen", 1, "aggregate"), streams)
    twin["kitchen"].random()
    # second hop drawn only if the first succeeded, from the parent's uplink stream
    assert streams["kitchen"].random() == twin["kitchen"].random()
