"""Deterministic virtual-time network simulation.

Messages are scheduled on a priority queue keyed by (delivery time,
sequence number), so runs with the same topology, seed, and workload
produce bit-identical event traces. Latency is per-link virtual
milliseconds; node failures are injected by flipping status, and
in-flight messages to a node that is DOWN at delivery time produce a
DeliveryFailure event for the sender at that same instant.

Each node may have a fixed service time: a node is a serial server,
so a message arriving while the node is busy waits, and the handler
runs service_time after processing starts. The netsim default is zero
service; the relay stack configures per-relay processing delay.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Union

DEFAULT_LATENCY_RANGE = (5.0, 50.0)


class UnknownNode(Exception):
    pass


class _Unreachable:
    def __repr__(self) -> str:  # pragma: no cover
        return "UNREACHABLE"


UNREACHABLE = _Unreachable()


class NodeStatus(Enum):
    UP = "UP"
    DOWN = "DOWN"


@dataclass(frozen=True)
class Delivery:
    message: Any
    sender: str
    receiver: str
    now: float


@dataclass(frozen=True)
class DeliveryFailure:
    message: Any
    sender: str
    receiver: str
    now: float


Event = Union[Delivery, DeliveryFailure]
Handler = Callable[[Event], None]


def _pair_latency(seed: int, a: str, b: str, lo: float, hi: float) -> float:
    digest = hashlib.sha256(f"{seed}:{a}:{b}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    return lo + u * (hi - lo)


class Topology:
    """Node set with per-link latencies and UP/DOWN status."""

    def __init__(
        self,
        node_ids: list[str],
        latency_seed: int = 0,
        latency_range: tuple[float, float] = DEFAULT_LATENCY_RANGE,
        matrix: Optional[dict[str, dict[str, float]]] = None,
        symmetric: bool = True,
    ):
        if len(set(node_ids)) != len(node_ids):
            raise ValueError("duplicate node ids")
        self.node_ids: list[str] = list(node_ids)
        self._nodes = set(node_ids)
        self.status: dict[str, NodeStatus] = {n: NodeStatus.UP for n in node_ids}
        self._seed = latency_seed
        self._range = latency_range
        self._matrix = matrix
        self._symmetric = symmetric
        if latency_range[0] <= 0:
            raise ValueError("latencies must be positive")

    def has_node(self, node: str) -> bool:
        return node in self._nodes

    def add_node(self, node: str) -> None:
        if node in self._nodes:
            raise ValueError(f"node {node!r} already present")
        self._nodes.add(node)
        self.node_ids.append(node)
        self.status[node] = NodeStatus.UP

    def latency(self, src: str, dst: str) -> float:
        if src not in self._nodes or dst not in self._nodes:
            raise UnknownNode(f"{src!r} or {dst!r}")
        if src == dst:
            return 0.0
        if self._matrix is not None:
            return self._matrix[src][dst]
        a, b = (src, dst) if (src < dst or not self._symmetric) else (dst, src)
        return _pair_latency(self._seed, a, b, *self._range)

    def is_up(self, node: str) -> bool:
        return self.status[node] is NodeStatus.UP


@dataclass
class RunStats:
    events_dispatched: int
    final_time: float
    horizon_exceeded: bool = False


@dataclass(order=True)
class _Scheduled:
    deliver_at: float
    sequence: int
    kind: str = field(compare=False)
    target: str = field(compare=False)
    event: Any = field(compare=False)


class Network:
    """Event loop binding handlers to topology nodes."""

    def __init__(
        self,
        topology: Topology,
        service_times: Optional[dict[str, float]] = None,
        default_service_time: float = 0.0,
    ):
        self.topology = topology
        self.now: float = 0.0
        self._queue: list[_Scheduled] = []
        self._seq = 0
        self._handlers: dict[str, Handler] = {}
        self._service = dict(service_times or {})
        self._default_service = default_service_time
        self._busy_until: dict[str, float] = {}
        self.events_dispatched = 0

    def register_handler(self, node: str, handler: Handler) -> None:
        if not self.topology.has_node(node):
            raise UnknownNode(node)
        self._handlers[node] = handler

    def service_time(self, node: str) -> float:
        return self._service.get(node, self._default_service)

    def _push(self, deliver_at: float, kind: str, target: str, event: Any) -> None:
        heapq.heappush(
            self._queue, _Scheduled(deliver_at, self._seq, kind, target, event)
        )
        self._seq += 1

    def send(self, sender: str, receiver: str, message: Any) -> float:
        """Schedule delivery; returns the arrival time."""
        if not self.topology.has_node(sender):
            raise UnknownNode(sender)
        if not self.topology.has_node(receiver):
            raise UnknownNode(receiver)
        arrive_at = self.now + self.topology.latency(sender, receiver)
        self._push(
            arrive_at,
            "arrival",
            receiver,
            Delivery(message=message, sender=sender, receiver=receiver, now=arrive_at),
        )
        return arrive_at

    def at(self, when: float, action: Callable[[], None]) -> None:
        """Schedule a control action (failure injection etc.) at a time."""
        if when < self.now:
            raise ValueError("cannot schedule in the past")
        self._push(when, "control", "", action)

    def fail_node(self, node: str) -> None:
        if not self.topology.has_node(node):
            raise UnknownNode(node)
        self.topology.status[node] = NodeStatus.DOWN

    def restore_node(self, node: str) -> None:
        if not self.topology.has_node(node):
            raise UnknownNode(node)
        self.topology.status[node] = NodeStatus.UP

    def ping(self, src: str, dst: str) -> Union[float, _Unreachable]:
        """Round-trip latency probe; measurement only, never queued."""
        if src == dst:
            return 0.0
        if not self.topology.is_up(dst):
            return UNREACHABLE
        return 2.0 * self.topology.latency(src, dst)

    def _dispatch(self, item: _Scheduled) -> None:
        self.events_dispatched += 1
        if item.kind == "control":
            item.event()
            return
        if item.kind == "arrival":
            ev: Delivery = item.event
            if not self.topology.is_up(ev.receiver):
                failure = DeliveryFailure(
                    message=ev.message,
                    sender=ev.sender,
                    receiver=ev.receiver,
                    now=item.deliver_at,
                )
                self._push(item.deliver_at, "handle", ev.sender, failure)
                return
            service = self.service_time(ev.receiver)
            start = max(item.deliver_at, self._busy_until.get(ev.receiver, 0.0))
            done = start + service
            self._busy_until[ev.receiver] = done
            if done > item.deliver_at:
                self._push(
                    done,
                    "handle",
                    ev.receiver,
                    Delivery(ev.message, ev.sender, ev.receiver, done),
                )
                return
            item = _Scheduled(item.deliver_at, item.sequence, "handle", ev.receiver, ev)
        handler = self._handlers.get(item.target)
        if handler is not None:
            handler(item.event)

    def run_until_idle(self, max_virtual_time: Optional[float] = None) -> RunStats:
        start_count = self.events_dispatched
        horizon_exceeded = False
        while self._queue:
            item = heapq.heappop(self._queue)
            if max_virtual_time is not None and item.deliver_at > max_virtual_time:
                heapq.heappush(self._queue, item)
                horizon_exceeded = True
                break
            if item.deliver_at < self.now:
                raise AssertionError("event scheduled in the past")
            self.now = item.deliver_at
            self._dispatch(item)
        return RunStats(
            events_dispatched=self.events_dispatched - start_count,
            final_time=self.now,
            horizon_exceeded=horizon_exceeded,
        )


def load_topology(doc: Union[str, dict]) -> tuple[Topology, list[tuple[str, float]]]:
    """Build a topology from a JSON document.

    Schema: {"nodes": [...], "latency_seed": int or "matrix": {...},
    "latency_range": [lo, hi], "symmetric": bool,
    "failures": [{"node": id, "at": ms}]}.
    Returns the topology and the failure schedule.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    topo = Topology(
        node_ids=list(doc["nodes"]),
        latency_seed=doc.get("latency_seed", 0),
        latency_range=tuple(doc.get("latency_range", DEFAULT_LATENCY_RANGE)),
        matrix=doc.get("matrix"),
        symmetric=doc.get("symmetric", True),
    )
    failures = [(f["node"], float(f["at"])) for f in doc.get("failures", [])]
    for node, _ in failures:
        if not topo.has_node(node):
            raise UnknownNode(node)
    return topo, failures


def apply_failure_schedule(net: Network, failures: list[tuple[str, float]]) -> None:
    for node, at in failures:
        net.at(at, lambda n=node: net.fail_node(n))
