"""Deterministic discrete-event driver.

Time is kept in integer milliseconds.  Pending events are ordered by
``(tick, node_id, kind priority, insertion order)``; that order is part of the
golden-log contract and must not change without regenerating the fixtures.
"""

from __future__ import annotations

import datetime as dt
import heapq
import logging
from dataclasses import dataclass, field
from enum import IntEnum

from .energy import COMPONENTS, EnergyLedger, PowerTracker
from .environment import sample_environment
from .metrics import Metrics, MetricsCollector
from .network import Message, Role, send_request, send_to_sink
from .node import (
    Event, EventKind, Forward, PowerOn, Receive, Request, ReturnToSleep, Sampled, Transmit,
    initial_state, node_step,
)
from .rng import seed_stream
from .scenario import Scenario

log = logging.getLogger(__name__)

TICKS_PER_S = 1000


class CausalityError(RuntimeError):
    pass


class EngineKind(IntEnum):
    DELIVERY = 7
    LOSS = 8
    ISSUE_REQUEST = 9


MSG_KIND = {"alert": "alert_tx", "aggregate": "aggregate_tx", "request_reply": "reply"}
GENERATED_KINDS = frozenset(MSG_KIND.values())


@dataclass(slots=True)
class EventRecord:
    t: int
    node: str
    kind: str
    origin: str = ""
    seq: int = -1
    msg: str = ""
    room: str = ""
    temp: float | None = None
    humidity: float | None = None
    aqi: float | None = None
    hop: int = -1
    info: str = ""
    created: int = -1


RECORD_HEADER = "t_ms,time,node,kind,origin,seq,msg,room,temp,humidity,aqi,hop,info,created_ms"


def _f(x) -> str:
    return "" if x is None else f"{x:.6f}"


class RecordFormatter:
    """CSV rows with an ISO-8601 wall time relative to the scenario start date."""

    def __init__(self, start_date: dt.date):
        self.base = dt.datetime.combine(start_date, dt.time())

    def __call__(self, r: EventRecord) -> str:
        stamp = (self.base + dt.timedelta(milliseconds=r.t)).isoformat(timespec="milliseconds")
        return (f"{r.t},{stamp},{r.node},{r.kind},{r.origin},{r.seq},{r.msg},{r.room},"
                f"{_f(r.temp)},{_f(r.humidity)},{_f(r.aqi)},{r.hop},{r.info},{r.created}")


@dataclass
class EngineStats:
    scheduled: int = 0
    processed: int = 0
    records: int = 0


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    horizon_ticks: int
    ledgers: dict
    metrics: Metrics
    stats: EngineStats
    records: list | None = None
    final_states: dict = field(default_factory=dict)

    @property
    def horizon_s(self) -> float:
        return self.horizon_ticks / TICKS_PER_S


class Simulation:
    def __init__(self, scenario: Scenario, seed: int | None = None, log_sink=None, keep_records: bool = True):
        self.sc = scenario.validate()
        self.seed = scenario.master_seed if seed is None else seed
        self.horizon = round(scenario.duration * TICKS_PER_S)
        self.topology = scenario.topology
        self.coordinator = self.topology.coordinator
        self.configs = {n.node_id: n for n in scenario.nodes}
        self.rank = {nid: i for i, nid in enumerate(sorted(self.configs))}
        self.states = {nid: initial_state(cfg) for nid, cfg in self.configs.items()}
        self.rooms = {r.room_id: r for r in scenario.rooms}
        self.room_events = {rid: [e for e in scenario.events if e.room_id == rid] for rid in self.rooms}
        self.env_rng = {rid: seed_stream(self.seed, "env", rid) for rid in self.rooms}
        self.sensor_rng = {nid: seed_stream(self.seed, "sensor", nid) for nid in self.configs}
        self.link_rng = {child: seed_stream(self.seed, "link", child) for child in self.topology.parent}
        self.ledgers = {}
        self.trackers = {}
        for nid, cfg in self.configs.items():
            ledger = EnergyLedger(nid)
            comps = COMPONENTS if cfg.senses else ("radio", "mcu")
            self.ledgers[nid] = ledger
            self.trackers[nid] = PowerTracker(ledger, scenario.power, comps)
        self.warmup = round(scenario.sensors.gas.warmup_duration * TICKS_PER_S)
        self.now = 0
        self.heap: list = []
        self.counter = 0
        self.stats = EngineStats()
        self.collector = MetricsCollector(scenario)
        self.log_sink = log_sink
        self.records: list | None = [] if keep_records else None

    # ------------------------------------------------------------ plumbing
    def schedule(self, tick: int, node_id: str, kind: int, payload=None) -> bool:
        if tick < self.now:
            raise CausalityError(f"event {kind!r} for {node_id} at {tick} scheduled from {self.now}")
        if tick >= self.horizon:
            return False
        self.counter += 1
        heapq.heappush(self.heap, (tick, self.rank[node_id], int(kind), self.counter, node_id, payload))
        self.stats.scheduled += 1
        return True

    def emit(self, rec: EventRecord) -> None:
        self.stats.records += 1
        self.collector.add(rec)
        if self.records is not None:
            self.records.append(rec)
        if self.log_sink is not None:
            self.log_sink(rec)

    def _listening(self, node_id: str, t_s: float) -> bool:
        return self.configs[node_id].is_listening(round(t_s * TICKS_PER_S))

    def _schedule_sample(self, nid: str, at: int | None) -> None:
        if at is None or at >= self.horizon:
            return
        self.schedule(max(self.now, at - self.warmup), nid, EventKind.SENSORS_ON)
        self.schedule(at, nid, EventKind.SAMPLE_DUE)

    # ------------------------------------------------------------ run
    def run(self) -> RunResult:
        for nid in sorted(self.configs):
            cfg, st = self.configs[nid], self.states[nid]
            if cfg.role == Role.COORDINATOR:
                for comp in ("radio", "mcu"):
                    self.trackers[nid].powered(comp, 0, self.horizon)
                continue
            self._schedule_sample(nid, st.next_sample_at)
            if st.next_report_at is not None:
                self.schedule(st.next_report_at, nid, EventKind.REPORT_DUE)
            if st.next_wake_at is not None:
                self.schedule(st.next_wake_at, nid, EventKind.WAKE)
        for t_s, target in self.sc.requests:
            self.schedule(round(t_s * TICKS_PER_S), self.coordinator, EngineKind.ISSUE_REQUEST, target)

        heap = self.heap
        while heap:
            tick, _, kind, _, nid, payload = heapq.heappop(heap)
            self.now = tick
            self.stats.processed += 1
            if kind <= EventKind.MESSAGE_TO_FORWARD:
                self._node_event(nid, EventKind(kind), payload)
            elif kind == EngineKind.DELIVERY:
                self._delivery(payload)
            elif kind == EngineKind.LOSS:
                self._loss(nid, *payload)
            else:
                self._issue_request(payload)

        for nid, tracker in self.trackers.items():
            tracker.finish(self.horizon)
        metrics = self.collector.finalize(self.ledgers)
        return RunResult(self.sc, self.seed, self.horizon, self.ledgers, metrics, self.stats,
                         self.records, self.states)

    def _node_event(self, nid: str, kind: EventKind, payload) -> None:
        cfg, st = self.configs[nid], self.states[nid]
        now = self.now
        if kind == EventKind.SAMPLE_DUE:
            payload = sample_environment(self.rooms[cfg.room_id], self.room_events[cfg.room_id],
                                         now / TICKS_PER_S, self.env_rng[cfg.room_id])
        elif kind == EventKind.WAKE:
            self.emit(EventRecord(now, nid, "wake"))
        elif kind == EventKind.SLEEP:
            self.emit(EventRecord(now, nid, "sleep"))
        elif kind == EventKind.REQUEST_ARRIVED:
            self.emit(EventRecord(now, nid, "request", origin=self.coordinator, seq=payload.request_id,
                                  msg="request", created=payload.issued_at))

        st, actions = node_step(st, cfg, Event(kind, now, payload), sensors=self.sc.sensors,
                                rng=self.sensor_rng[nid])
        tracker = self.trackers[nid]
        for a in actions:
            if isinstance(a, Sampled):
                s = a.sample
                self.emit(EventRecord(now, nid, "sample", room=cfg.room_id, temp=s.temp, humidity=s.humidity,
                                      aqi=s.aqi, info="significant" if a.significant else ""))
            elif isinstance(a, Transmit):
                tracker.airtime(1)
                self._transmit(nid, a.report)
            elif isinstance(a, Forward):
                tracker.airtime(2)
                m = a.message
                self.emit(EventRecord(now, nid, "forward", origin=m.origin, seq=m.seq, msg=m.kind,
                                      created=round(m.created_at * TICKS_PER_S)))
            elif isinstance(a, Receive):
                tracker.airtime(a.frames)
            elif isinstance(a, PowerOn):
                end = min(a.end, self.horizon)
                for comp in a.components:
                    if comp in tracker.cursor:
                        tracker.powered(comp, a.start, end)
            elif isinstance(a, ReturnToSleep):
                if a.at > now:
                    end = min(a.at, self.horizon)
                    tracker.powered("radio", now, end)
                    tracker.powered("mcu", now, end)
                    self.schedule(a.at, nid, EventKind.SLEEP)

        if kind == EventKind.SAMPLE_DUE:
            self._schedule_sample(nid, st.next_sample_at)
        elif kind == EventKind.REPORT_DUE:
            self.schedule(st.next_report_at, nid, EventKind.REPORT_DUE)
        elif kind == EventKind.WAKE and st.next_wake_at is not None:
            self.schedule(st.next_wake_at, nid, EventKind.WAKE)

    def _transmit(self, nid: str, report) -> None:
        now = self.now
        kind = report.kind if report.kind != "request_reply" else "reply"
        self.emit(EventRecord(now, nid, MSG_KIND[report.kind], origin=nid, seq=report.seq, msg=kind,
                              temp=report.temp, humidity=report.humidity, aqi=report.aqi,
                              info="empty" if report.empty else "", created=now))
        msg = Message(nid, report.seq, kind, payload=report, created_at=now / TICKS_PER_S)
        out = send_to_sink(self.topology, msg, self.link_rng, self._listening, now / TICKS_PER_S)
        self._schedule_hops(msg, out, final=None)

    def _schedule_hops(self, msg: Message, out, final) -> None:
        for k, hop in enumerate(out.hops, start=1):
            arrive = round(hop.arrived_at * TICKS_PER_S)
            if not hop.delivered:
                self.schedule(arrive, hop.receiver, EngineKind.LOSS, (msg, k, hop.reason))
                return
            last = k == len(out.hops)
            if not last:
                self.schedule(arrive, hop.receiver, EventKind.MESSAGE_TO_FORWARD, msg)
            elif final is None:
                self.schedule(arrive, hop.receiver, EngineKind.DELIVERY, (msg, k))
            else:
                self.schedule(arrive, hop.receiver, EventKind.REQUEST_ARRIVED, final)

    def _delivery(self, payload) -> None:
        msg, hops = payload
        msg.delivered_at = self.now / TICKS_PER_S
        self.emit(EventRecord(self.now, self.coordinator, "delivery", origin=msg.origin, seq=msg.seq,
                              msg=msg.kind, hop=hops, created=round(msg.created_at * TICKS_PER_S)))

    def _loss(self, nid: str, msg: Message, hop: int, reason: str) -> None:
        self.emit(EventRecord(self.now, nid, "loss", origin=msg.origin, seq=msg.seq, msg=msg.kind,
                              hop=hop, info=reason, created=round(msg.created_at * TICKS_PER_S)))

    def _issue_request(self, target: str) -> None:
        coord = self.states[self.coordinator]
        rid = coord.next_seq()
        now = self.now
        self.emit(EventRecord(now, self.coordinator, "request", origin=self.coordinator, seq=rid,
                              msg="request", info=target, created=now))
        msg = Message(self.coordinator, rid, "request", target=target, created_at=now / TICKS_PER_S)
        out = send_request(self.topology, msg, self.link_rng, self._listening, now / TICKS_PER_S)
        self._schedule_hops(msg, out, final=Request(rid, target, now))


def run(scenario: Scenario, *, seed: int | None = None, log_sink=None, keep_records: bool = True) -> RunResult:
    """Simulate ``scenario`` to its horizon.

    ``seed`` overrides ``scenario.master_seed``.  ``log_sink`` receives every
    ``EventRecord`` as it is produced; ``keep_records=False`` keeps memory flat
    for long runs (metrics are still collected incrementally).
    """
    return Simulation(scenario, seed, log_sink, keep_records).run()
