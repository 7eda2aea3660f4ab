"""Per-node sensing, reporting and forwarding state machine.

A node sleeps between timed events.  On each sampling tick it powers its
sensors, waits out the heater warm-up, reads, and classifies the sample: a
significant sample goes out at once as an alert, anything else is buffered.
Every reporting interval the buffer is averaged into one aggregate report.
Periodic wake-ups service queued requests; routers additionally keep the radio
up for a short listening window so children's traffic can be forwarded.

All times inside this module are integer milliseconds ("ticks").
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from statistics import fmean

from .network import LinkParams, Message, Role
from .sensors import SensorSuite, read_sensors

TICKS_PER_S = 1000


class ProtocolError(RuntimeError):
    pass


class PowerState(str, Enum):
    SLEEPING = "sleeping"
    WAKING = "waking"
    SAMPLING = "sampling"
    TRANSMITTING = "transmitting"
    LISTENING = "listening"


class EventKind(IntEnum):
    """Node-level events.  The integer value is the tie-break priority."""

    SLEEP = 0
    SENSORS_ON = 1
    SAMPLE_DUE = 2
    REPORT_DUE = 3
    WAKE = 4
    REQUEST_ARRIVED = 5
    MESSAGE_TO_FORWARD = 6


@dataclass(frozen=True)
class Thresholds:
    temp_high: float = 32.0
    humidity_high: float = 80.0
    aqi_high: float = 150.0


@dataclass(frozen=True)
class NodeConfig:
    node_id: str
    role: Role
    room_id: str | None = None
    parent_id: str | None = None
    sampling_period_t: float = 60.0
    reporting_interval: float = 900.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    wake_interval: float = 60.0
    awake_window: float = 2.0
    sample_phase: float = 0.0
    report_phase: float = 0.0
    wake_phase: float = 0.0
    link: LinkParams = field(default_factory=LinkParams)

    @property
    def senses(self) -> bool:
        return self.room_id is not None and self.role != Role.COORDINATOR

    def violations(self, warmup_s: float = 0.0) -> list[str]:
        out = []
        if self.role == Role.COORDINATOR:
            if self.parent_id is not None:
                out.append("coordinator must not have a parent")
            return out
        if self.parent_id is None:
            out.append("non-coordinator needs a parent")
        if not self.sampling_period_t > 0:
            out.append(f"sampling_period_t must be > 0, got {self.sampling_period_t}")
        elif self.reporting_interval < self.sampling_period_t:
            out.append(
                f"reporting_interval ({self.reporting_interval}) must be >= sampling_period_t ({self.sampling_period_t})"
            )
        elif warmup_s > self.sampling_period_t:
            out.append(f"sensor warm-up ({warmup_s} s) exceeds sampling_period_t ({self.sampling_period_t} s)")
        if self.wake_interval < 0 or self.awake_window < 0:
            out.append("wake_interval and awake_window must be >= 0")
        elif self.wake_interval > 0 and self.awake_window > self.wake_interval:
            out.append("awake_window must not exceed wake_interval")
        for name in ("sample_phase", "report_phase", "wake_phase"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0")
        th = self.thresholds
        if not all(math.isfinite(v) or v == math.inf for v in (th.temp_high, th.humidity_high, th.aqi_high)):
            out.append("thresholds must be numbers")
        return out

    # Schedules, in ticks.  The k-th event (k >= 1) fires at phase + k * period.
    def _ticks(self, seconds: float) -> int:
        return round(seconds * TICKS_PER_S)

    def first_sample_at(self) -> int:
        return self._ticks(self.sample_phase + self.sampling_period_t)

    def first_report_at(self) -> int:
        return self._ticks(self.report_phase + self.reporting_interval)

    def first_wake_at(self) -> int | None:
        if self.wake_interval <= 0:
            return None
        return self._ticks(self.wake_phase + self.wake_interval)

    def is_listening(self, tick: int) -> bool:
        """Whether the radio is up in a periodic listening window at ``tick``."""
        if self.role == Role.COORDINATOR:
            return True
        interval = self._ticks(self.wake_interval)
        if interval <= 0:
            return False
        rel = tick - self._ticks(self.wake_phase)
        if rel < interval:
            return False
        return rel % interval < self._ticks(self.awake_window)


@dataclass(frozen=True, slots=True)
class Sample:
    t: int
    temp: float
    humidity: float
    aqi: float
    gas_ppm: float = math.nan


@dataclass(frozen=True)
class SensorReport:
    origin: str
    seq: int
    kind: str  # "aggregate" | "alert" | "request_reply"
    t: int
    temp: float | None = None
    humidity: float | None = None
    aqi: float | None = None
    window: tuple | None = None
    n_samples: int = 0
    empty: bool = False


@dataclass(frozen=True)
class Request:
    request_id: int
    target: str
    issued_at: int


@dataclass
class Event:
    kind: EventKind
    t: int
    payload: object = None


# Actions handed back to the engine.
@dataclass(frozen=True)
class Transmit:
    report: SensorReport


@dataclass(frozen=True)
class Forward:
    message: Message


@dataclass(frozen=True)
class Receive:
    frames: int = 1


@dataclass(frozen=True)
class PowerOn:
    components: tuple
    start: int
    end: int


@dataclass(frozen=True)
class Sampled:
    sample: Sample
    significant: bool


@dataclass(frozen=True)
class ReturnToSleep:
    at: int


@dataclass
class NodeState:
    node_id: str
    now: int = 0
    power_state: PowerState = PowerState.SLEEPING
    buffer: list = field(default_factory=list)
    pending_requests: deque = field(default_factory=deque)
    seq_counter: int = 0
    sensors_on_since: int | None = None
    listening_until: int = 0
    last_sample: Sample | None = None
    last_aggregate: SensorReport | None = None
    next_sample_at: int | None = None
    next_report_at: int | None = None
    next_wake_at: int | None = None

    def next_seq(self) -> int:
        self.seq_counter += 1
        return self.seq_counter


def initial_state(config: NodeConfig) -> NodeState:
    state = NodeState(config.node_id)
    if config.senses:
        state.next_sample_at = config.first_sample_at()
        state.next_report_at = config.first_report_at()
    if config.role != Role.COORDINATOR:
        state.next_wake_at = config.first_wake_at()
    return state


def classify_significance(sample, thresholds: Thresholds) -> bool:
    """True iff some reading is strictly above its threshold."""
    return (
        sample.temp > thresholds.temp_high
        or sample.humidity > thresholds.humidity_high
        or sample.aqi > thresholds.aqi_high
    )


def aggregate_buffer(buffer: list, origin: str = "", seq: int = 0, t: int | None = None) -> SensorReport | None:
    """Average the buffered samples into one report and empty the buffer.

    Returns ``None`` for an empty buffer (nothing to report).
    """
    if not buffer:
        return None
    report = SensorReport(
        origin=origin,
        seq=seq,
        kind="aggregate",
        t=buffer[-1].t if t is None else t,
        temp=fmean(s.temp for s in buffer),
        humidity=fmean(s.humidity for s in buffer),
        aqi=fmean(s.aqi for s in buffer),
        window=(buffer[0].t, buffer[-1].t),
        n_samples=len(buffer),
    )
    buffer.clear()
    return report


def handle_request(state: NodeState, request: Request | None = None) -> SensorReport:
    """Answer the oldest queued request with the freshest values the node holds."""
    if state.power_state == PowerState.SLEEPING:
        raise ProtocolError(f"{state.node_id} cannot service a request while asleep")
    if request is None:
        request = state.pending_requests.popleft()
    else:
        state.pending_requests.remove(request)
    seq = state.next_seq()
    if state.buffer:
        latest = state.buffer[-1]
    elif state.last_aggregate is not None:
        latest = state.last_aggregate
    else:
        latest = state.last_sample
    if latest is None:
        return SensorReport(state.node_id, seq, "request_reply", state.now, empty=True)
    return SensorReport(
        state.node_id, seq, "request_reply", state.now,
        temp=latest.temp, humidity=latest.humidity, aqi=latest.aqi,
    )


def _awake_after(state: NodeState) -> PowerState:
    return PowerState.LISTENING if state.listening_until > state.now else PowerState.SLEEPING


def _service_requests(state: NodeState, actions: list) -> None:
    while state.pending_requests:
        state.power_state = PowerState.TRANSMITTING
        actions.append(Transmit(handle_request(state)))


def node_step(state: NodeState, config: NodeConfig, event: Event, *, sensors: SensorSuite | None = None,
              rng=None) -> tuple[NodeState, list]:
    """Advance one node by one event and return the actions it takes.

    ``SAMPLE_DUE`` carries the ground-truth ``EnvReading`` as payload; ``sensors``
    and ``rng`` are then required.  ``REQUEST_ARRIVED`` carries a ``Request`` and
    ``MESSAGE_TO_FORWARD`` a ``Message``.
    """
    if event.t < state.now:
        raise ProtocolError(f"{state.node_id}: event at {event.t} precedes node time {state.now}")
    state.now = event.t
    kind = event.kind
    actions: list = []

    if kind == EventKind.SLEEP:
        if state.listening_until <= state.now and state.sensors_on_since is None:
            state.power_state = PowerState.SLEEPING
        return state, actions

    if kind == EventKind.SENSORS_ON:
        state.power_state = PowerState.SAMPLING
        state.sensors_on_since = state.now
        warmup = round(sensors.gas.warmup_duration * TICKS_PER_S) if sensors else 0
        actions.append(PowerOn(("gas", "humidity", "temp", "mcu"), state.now, state.now + warmup))
        return state, actions

    if kind == EventKind.SAMPLE_DUE:
        if sensors is None or rng is None:
            raise ProtocolError("SAMPLE_DUE needs a sensor suite and a noise stream")
        since = state.now if state.sensors_on_since is None else state.sensors_on_since
        state.power_state = PowerState.SAMPLING
        fields_ = read_sensors((state.now - since) / TICKS_PER_S, event.payload, sensors, rng)
        state.sensors_on_since = None
        sample = Sample(state.now, fields_.temp, fields_.humidity, fields_.aqi, fields_.gas_ppm)
        state.last_sample = sample
        significant = classify_significance(sample, config.thresholds)
        actions.append(Sampled(sample, significant))
        if significant:
            state.power_state = PowerState.TRANSMITTING
            actions.append(Transmit(SensorReport(
                config.node_id, state.next_seq(), "alert", state.now,
                temp=sample.temp, humidity=sample.humidity, aqi=sample.aqi,
                window=(sample.t, sample.t), n_samples=1,
            )))
        else:
            state.buffer.append(sample)
        if state.next_sample_at is not None:
            state.next_sample_at += round(config.sampling_period_t * TICKS_PER_S)
        state.power_state = _awake_after(state)
        if state.power_state == PowerState.SLEEPING:
            actions.append(ReturnToSleep(state.now))
        return state, actions

    if kind == EventKind.REPORT_DUE:
        if state.buffer:
            state.power_state = PowerState.TRANSMITTING
            report = aggregate_buffer(state.buffer, config.node_id, state.next_seq(), state.now)
            state.last_aggregate = report
            actions.append(Transmit(report))
        if state.next_report_at is not None:
            state.next_report_at += round(config.reporting_interval * TICKS_PER_S)
        state.power_state = _awake_after(state)
        return state, actions

    if kind == EventKind.WAKE:
        state.power_state = PowerState.WAKING
        window = round(config.awake_window * TICKS_PER_S)
        state.listening_until = max(state.listening_until, state.now + window)
        state.power_state = PowerState.LISTENING
        if state.pending_requests:
            # requests held by the parent come down with the poll
            actions.append(Receive(len(state.pending_requests)))
        _service_requests(state, actions)
        state.power_state = PowerState.LISTENING if window > 0 else PowerState.SLEEPING
        if state.next_wake_at is not None:
            state.next_wake_at += round(config.wake_interval * TICKS_PER_S)
        actions.append(ReturnToSleep(state.now + window))
        return state, actions

    if kind == EventKind.REQUEST_ARRIVED:
        state.pending_requests.append(event.payload)
        if state.power_state == PowerState.LISTENING and state.listening_until > state.now:
            actions.append(Receive())
            _service_requests(state, actions)
            state.power_state = _awake_after(state)
        return state, actions

    if kind == EventKind.MESSAGE_TO_FORWARD:
        if config.role == Role.END_DEVICE:
            raise ProtocolError(f"end device {config.node_id} cannot forward messages")
        prev = state.power_state
        state.power_state = PowerState.TRANSMITTING
        actions.append(Forward(event.payload))
        state.power_state = prev if prev != PowerState.TRANSMITTING else _awake_after(state)
        return state, actions

    raise ProtocolError(f"unhandled event {kind!r}")
