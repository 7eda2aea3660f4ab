"""Tree topology, upward routing and the per-hop loss model."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Role(str, Enum):
    COORDINATOR = "coordinator"
    ROUTER = "router"
    END_DEVICE = "end_device"


class RoutingError(KeyError):
    pass


@dataclass(frozen=True)
class LinkParams:
    delivery_probability: float = 1.0
    latency: float = 0.050


@dataclass
class Topology:
    """``parent`` maps each non-coordinator to its parent; ``links`` is keyed by the child."""

    roles: dict
    parent: dict
    links: dict = field(default_factory=dict)

    def link(self, child: str) -> LinkParams:
        return self.links.get(child) or LinkParams()

    @property
    def coordinator(self) -> str:
        coords = [n for n, r in self.roles.items() if r == Role.COORDINATOR]
        if len(coords) != 1:
            raise RoutingError(f"expected exactly one coordinator, found {len(coords)}")
        return coords[0]

    def children(self, node_id: str) -> list[str]:
        return sorted(c for c, p in self.parent.items() if p == node_id)


def validate_topology(topology: Topology) -> list[str]:
    """Every violation of the tree rules; an empty list means the topology is usable."""
    out = []
    roles, parent = topology.roles, topology.parent
    coords = sorted(n for n, r in roles.items() if r == Role.COORDINATOR)
    if not coords:
        out.append("no coordinator: a network needs exactly one")
    elif len(coords) > 1:
        out.append(f"multiple coordinators: {', '.join(coords)}")
    for n in coords:
        if n in parent:
            out.append(f"coordinator {n} must not have a parent")
    for child in sorted(parent):
        p = parent[child]
        if child not in roles:
            out.append(f"parent entry for unknown node {child}")
        elif p not in roles:
            out.append(f"{child}: parent {p} is not a known node")
        elif roles[p] == Role.END_DEVICE:
            out.append(f"{child}: parent {p} is an end_device and cannot route")
    for n in sorted(roles):
        if roles[n] != Role.COORDINATOR and n not in parent:
            out.append(f"orphan node {n}: no parent")
    for n in sorted(roles):
        seen = [n]
        cur = n
        while cur in parent and parent[cur] in roles:
            cur = parent[cur]
            if cur in seen:
                out.append(f"cycle through {n}: {' -> '.join(seen + [cur])}")
                break
            seen.append(cur)
    for child, lp in sorted(topology.links.items()):
        if not 0.0 <= lp.delivery_probability <= 1.0:
            out.append(f"link {child}: delivery_probability must be in [0, 1], got {lp.delivery_probability}")
        if lp.latency < 0:
            out.append(f"link {child}: latency must be >= 0, got {lp.latency}")
    return out


def route_upward(topology: Topology, origin: str) -> list[str]:
    """``[origin, parent(origin), ..., coordinator]``."""
    if origin not in topology.roles:
        raise RoutingError(f"unknown node {origin!r}")
    path = [origin]
    while topology.roles[path[-1]] != Role.COORDINATOR:
        nxt = topology.parent.get(path[-1])
        if nxt is None or len(path) > len(topology.roles):
            raise RoutingError(f"no route from {origin} to the coordinator")
        path.append(nxt)
    return path


def attempt_delivery(link: LinkParams, rng) -> tuple[bool, float]:
    """One Bernoulli trial on a hop; always consumes exactly one uniform draw."""
    delivered = rng.random() < link.delivery_probability
    return delivered, link.latency


@dataclass
class Message:
    origin: str
    seq: int
    kind: str
    payload: object = None
    target: str | None = None
    hop_path_so_far: list = field(default_factory=list)
    created_at: float = 0.0
    delivered_at: float | None = None

    @property
    def is_alert(self) -> bool:
        return self.kind == "alert"


@dataclass
class HopOutcome:
    sender: str
    receiver: str
    departed_at: float
    arrived_at: float
    delivered: bool
    reason: str = ""


@dataclass
class DeliveryOutcome:
    delivered: bool
    path: list
    hops: list
    lost_at_hop: int | None = None
    reason: str = ""
    delivered_at: float | None = None


def always_awake(node_id: str, t: float) -> bool:
    return True


def _walk(topology, path, message, link_rngs, is_listening, t, held_final):
    hops = []
    clock = t
    for k, (sender, receiver) in enumerate(zip(path, path[1:]), start=1):
        child = sender if topology.parent.get(sender) == receiver else receiver
        link = topology.link(child)
        ok, latency = attempt_delivery(link, link_rngs[child])
        arrive = clock + latency
        reason = "" if ok else "link"
        if ok and not message.is_alert:
            role = topology.roles[receiver]
            held = held_final and k == len(path) - 1
            if role == Role.ROUTER and not held and not is_listening(receiver, arrive):
                ok, reason = False, "asleep"
        hops.append(HopOutcome(sender, receiver, clock, arrive, ok, reason))
        if not ok:
            return DeliveryOutcome(False, path, hops, lost_at_hop=k, reason=reason)
        message.hop_path_so_far.append(receiver)
        clock = arrive
    return DeliveryOutcome(True, path, hops, delivered_at=clock)


def send_to_sink(topology: Topology, message: Message, link_rngs, is_listening=always_awake,
                 t: float | None = None) -> DeliveryOutcome:
    """Walk the upward route applying one delivery attempt per hop.

    ``link_rngs`` maps each child node to the stream of its uplink.  A router
    that is not listening when a non-alert frame arrives drops it; alerts wake
    the whole path.  The coordinator always listens.
    """
    t = message.created_at if t is None else t
    path = route_upward(topology, message.origin)
    message.hop_path_so_far = [message.origin]
    out = _walk(topology, path, message, link_rngs, is_listening, t, held_final=False)
    if out.delivered:
        message.delivered_at = out.delivered_at
    return out


def send_request(topology: Topology, message: Message, link_rngs, is_listening=always_awake,
                 t: float | None = None) -> DeliveryOutcome:
    """Carry a sink request down the reverse tree path to ``message.target``.

    The last hop into an end device is held by its parent until the child polls,
    so only the link draw applies there.
    """
    t = message.created_at if t is None else t
    path = list(reversed(route_upward(topology, message.target)))
    message.hop_path_so_far = [path[0]]
    held = topology.roles[message.target] == Role.END_DEVICE
    return _walk(topology, path, message, link_rngs, is_listening, t, held_final=held)
