"""Scenario files: a strict YAML schema mapped onto the simulator's dataclasses.

Unknown keys are rejected so that a typo never silently falls back to a
default.  Durations accept plain seconds or a suffixed string (``"15m"``,
``"30d"``); times of day are ``"HH:MM"`` or ``"HH:MM:SS"``.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .energy import PRESETS, PowerProfile, power_profile
from .environment import DAY_S, ActivityEvent, RoomProfile
from .network import LinkParams, Role, Topology, validate_topology
from .node import NodeConfig, Thresholds
from .sensors import AqiMapping, GasSensorModel, SensorSuite

PRESET_NAMES = ("paper-default", "kitchen-forwarder", "lossless")


class ScenarioError(ValueError):
    """Raised with every violation found, each as ``field.path: message``."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n" + "\n".join(f"  {v}" for v in self.violations))


class ScenarioParseError(ValueError):
    def __init__(self, message, line=None, column=None, source=None):
        self.line, self.column, self.source = line, column, source
        where = f"{source or '<scenario>'}"
        if line is not None:
            where += f":{line}:{column}"
        super().__init__(f"{where}: {message}")


@dataclass
class Scenario:
    name: str = "unnamed"
    duration: float = 30 * DAY_S
    master_seed: int = 0
    start_date: dt.date = dt.date(2016, 2, 11)
    rooms: list = field(default_factory=list)
    events: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    power: PowerProfile = field(default_factory=PowerProfile)
    power_preset: str = "xbee_s2"
    sensors: SensorSuite = field(default_factory=SensorSuite)
    requests: list = field(default_factory=list)  # (time_s, target node)
    description: str = ""

    @property
    def topology(self) -> Topology:
        return Topology(
            roles={n.node_id: n.role for n in self.nodes},
            parent={n.node_id: n.parent_id for n in self.nodes if n.parent_id is not None},
            links={n.node_id: n.link for n in self.nodes if n.parent_id is not None},
        )

    def node(self, node_id: str) -> NodeConfig:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def room(self, room_id: str) -> RoomProfile:
        for r in self.rooms:
            if r.room_id == room_id:
                return r
        raise KeyError(room_id)

    @property
    def n_days(self) -> int:
        return max(1, -(-int(round(self.duration)) // int(DAY_S)))

    def violations(self) -> list[str]:
        out = []
        if not self.duration > 0:
            out.append(f"duration: must be > 0, got {self.duration}")
        if not 0 <= self.master_seed < 2**64:
            out.append(f"master_seed: must be an unsigned 64-bit integer, got {self.master_seed}")
        room_ids = [r.room_id for r in self.rooms]
        for i, r in enumerate(self.rooms):
            if room_ids.count(r.room_id) > 1:
                out.append(f"rooms[{i}].room_id: duplicate room {r.room_id!r}")
            out += [f"rooms[{i}]: {m}" for m in r.violations()]
        for i, ev in enumerate(self.events):
            if ev.room_id not in room_ids:
                out.append(f"events[{i}].room_id: unknown room {ev.room_id!r}")
            out += [f"events[{i}]: {m}" for m in ev.violations()]
        out += [f"sensors.gas: {m}" for m in self.sensors.gas.violations()]
        out += [f"sensors.aqi_breakpoints: {m}" for m in self.sensors.aqi.violations()]
        if self.sensors.temp_sigma < 0 or self.sensors.humidity_sigma < 0:
            out.append("sensors: sigmas must be >= 0")
        out += [f"power: {m}" for m in self.power.violations()]
        node_ids = [n.node_id for n in self.nodes]
        if not self.nodes:
            out.append("nodes: at least one node is required")
        for i, n in enumerate(self.nodes):
            if node_ids.count(n.node_id) > 1:
                out.append(f"nodes[{i}].node_id: duplicate node {n.node_id!r}")
            if n.room_id is not None and n.room_id not in room_ids:
                out.append(f"nodes[{i}].room: unknown room {n.room_id!r}")
            out += [f"nodes[{i}] ({n.node_id}): {m}" for m in n.violations(self.sensors.gas.warmup_duration)]
        out += [f"topology: {m}" for m in validate_topology(self.topology)]
        for i, (t, target) in enumerate(self.requests):
            if target not in node_ids:
                out.append(f"requests[{i}].target: unknown node {target!r}")
            elif self.node(target).role == Role.COORDINATOR:
                out.append(f"requests[{i}].target: the coordinator cannot be a request target")
            if not 0 <= t < self.duration:
                out.append(f"requests[{i}].time: {t} s lies outside the run [0, {self.duration})")
        return out

    def validate(self) -> Scenario:
        v = self.violations()
        if v:
            raise ScenarioError(v)
        return self


# ---------------------------------------------------------------- parsing

_UNITS = {"ms": 0.001, "s": 1.0, "m": 60.0, "min": 60.0, "h": 3600.0, "d": DAY_S}
_DUR_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ms|s|min|m|h|d)?\s*$")
_TOD_RE = re.compile(r"^(\d{1,2}):(\d{2})(?::(\d{2}))?$")


class _Reader:
    """Collects schema violations while walking a parsed YAML document."""

    def __init__(self):
        self.errors: list[str] = []

    def mapping(self, obj, path, allowed, required=()):
        if obj is None:
            obj = {}
        if not isinstance(obj, dict):
            self.errors.append(f"{path}: expected a mapping, got {type(obj).__name__}")
            return {}
        for k in obj:
            if k not in allowed:
                self.errors.append(f"{path}.{k}: unknown key {k!r} (allowed: {', '.join(sorted(allowed))})")
        for k in required:
            if k not in obj:
                self.errors.append(f"{path}.{k}: required key missing")
        return {k: v for k, v in obj.items() if k in allowed}

    def seq(self, obj, path):
        if obj is None:
            return []
        if not isinstance(obj, list):
            self.errors.append(f"{path}: expected a list, got {type(obj).__name__}")
            return []
        return obj

    def number(self, v, path, default=None):
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.errors.append(f"{path}: expected a number, got {v!r}")
            return default
        return float(v)

    def duration(self, v, path, default=None):
        if v is None:
            return default
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
        if isinstance(v, str):
            m = _DUR_RE.match(v)
            if m:
                return float(m.group(1)) * _UNITS[m.group(2) or "s"]
        self.errors.append(f"{path}: expected a duration (seconds or e.g. '15m', '30d'), got {v!r}")
        return default

    def time_of_day(self, v, path):
        if isinstance(v, int) and not isinstance(v, bool):
            # YAML 1.1 reads unquoted 13:00 as a base-60 integer (minutes * 60 + seconds)
            return float(v * 60) if v < 24 * 60 + 1 else None
        if isinstance(v, str):
            m = _TOD_RE.match(v.strip())
            if m:
                h, mi, s = int(m.group(1)), int(m.group(2)), int(m.group(3) or 0)
                secs = h * 3600 + mi * 60 + s
                if mi < 60 and s < 60 and secs <= DAY_S:
                    return float(secs)
        self.errors.append(f"{path}: expected a time of day 'HH:MM', got {v!r}")
        return 0.0

    def string(self, v, path, default=None):
        if v is None:
            return default
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            self.errors.append(f"{path}: expected a string, got {v!r}")
            return default
        return str(v)

    def date(self, v, path, default=None):
        if v is None:
            return default
        if isinstance(v, dt.datetime):
            return v.date()
        if isinstance(v, dt.date):
            return v
        try:
            return dt.date.fromisoformat(str(v))
        except ValueError:
            self.errors.append(f"{path}: expected an ISO date YYYY-MM-DD, got {v!r}")
            return default


_ROOM_KEYS = {f.name for f in dataclasses.fields(RoomProfile)}
_EVENT_KEYS = {"room_id", "start", "end", "temp_boost", "gas_boost", "recurrence", "date"}
_GAS_KEYS = {f.name for f in dataclasses.fields(GasSensorModel)}
_SENSOR_KEYS = {"gas", "aqi_breakpoints", "temp_sigma", "humidity_sigma"}
_POWER_KEYS = {f.name for f in dataclasses.fields(PowerProfile)} | {"preset"}
_THRESH_KEYS = {f.name for f in dataclasses.fields(Thresholds)}
_LINK_KEYS = {"delivery_probability", "latency"}
_NODE_TUNABLES = {
    "sampling_period": "sampling_period_t",
    "reporting_interval": "reporting_interval",
    "wake_interval": "wake_interval",
    "awake_window": "awake_window",
    "sample_phase": "sample_phase",
    "report_phase": "report_phase",
    "wake_phase": "wake_phase",
}
_NODE_KEYS = {"node_id", "role", "room", "parent", "link", "thresholds"} | set(_NODE_TUNABLES)
_DEFAULT_KEYS = {"link", "thresholds"} | set(_NODE_TUNABLES)
_TOP_KEYS = {
    "name", "description", "start_date", "duration", "master_seed", "rooms", "events",
    "sensors", "power", "node_defaults", "role_defaults", "nodes", "requests",
}


def _read_node_settings(r, raw, path, base):
    """Overlay tunables from ``raw`` on ``base`` (a dict of NodeConfig kwargs)."""
    out = dict(base)
    for key, attr in _NODE_TUNABLES.items():
        if key in raw:
            out[attr] = r.duration(raw[key], f"{path}.{key}", out.get(attr))
    if "thresholds" in raw:
        th = r.mapping(raw["thresholds"], f"{path}.thresholds", _THRESH_KEYS)
        cur = out.get("thresholds", Thresholds())
        out["thresholds"] = dataclasses.replace(
            cur, **{k: r.number(v, f"{path}.thresholds.{k}", getattr(cur, k)) for k, v in th.items()}
        )
    if "link" in raw:
        lk = r.mapping(raw["link"], f"{path}.link", _LINK_KEYS)
        cur = out.get("link", LinkParams())
        out["link"] = LinkParams(
            delivery_probability=r.number(lk.get("delivery_probability"), f"{path}.link.delivery_probability",
                                          cur.delivery_probability),
            latency=r.duration(lk.get("latency"), f"{path}.link.latency", cur.latency),
        )
    return out


def scenario_from_dict(doc, source: str | None = None) -> Scenario:
    """Build and validate a scenario; raises ``ScenarioError`` listing every problem."""
    r = _Reader()
    top = r.mapping(doc, "scenario", _TOP_KEYS, required=("nodes",))
    sc = Scenario()
    sc.name = r.string(top.get("name"), "name", sc.name)
    sc.description = r.string(top.get("description"), "description", "")
    sc.start_date = r.date(top.get("start_date"), "start_date", sc.start_date)
    sc.duration = r.duration(top.get("duration"), "duration", sc.duration)
    seed = top.get("master_seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        r.errors.append(f"master_seed: expected an integer, got {seed!r}")
    else:
        sc.master_seed = seed

    for i, raw in enumerate(r.seq(top.get("rooms"), "rooms")):
        p = f"rooms[{i}]"
        m = r.mapping(raw, p, _ROOM_KEYS, required=("room_id",))
        kw = {k: r.number(v, f"{p}.{k}") for k, v in m.items() if k != "room_id"}
        sc.rooms.append(RoomProfile(room_id=r.string(m.get("room_id"), f"{p}.room_id", "?"),
                                    **{k: v for k, v in kw.items() if v is not None}))

    for i, raw in enumerate(r.seq(top.get("events"), "events")):
        p = f"events[{i}]"
        m = r.mapping(raw, p, _EVENT_KEYS, required=("room_id", "start", "end"))
        recurrence = m.get("recurrence", "daily")
        day = None
        if recurrence == "once":
            d = r.date(m.get("date"), f"{p}.date")
            if d is None:
                r.errors.append(f"{p}.date: a one-off event needs a date")
            else:
                day = (d - sc.start_date).days
        elif recurrence != "daily":
            r.errors.append(f"{p}.recurrence: expected 'daily' or 'once', got {recurrence!r}")
        elif "date" in m:
            r.errors.append(f"{p}.date: only one-off events take a date")
        sc.events.append(ActivityEvent(
            room_id=r.string(m.get("room_id"), f"{p}.room_id", "?"),
            start=r.time_of_day(m.get("start"), f"{p}.start") if "start" in m else 0.0,
            end=r.time_of_day(m.get("end"), f"{p}.end") if "end" in m else 0.0,
            temp_boost=r.number(m.get("temp_boost"), f"{p}.temp_boost", 0.0),
            gas_boost=r.number(m.get("gas_boost"), f"{p}.gas_boost", 0.0),
            day=day,
        ))

    sens = r.mapping(top.get("sensors"), "sensors", _SENSOR_KEYS)
    gas_raw = r.mapping(sens.get("gas"), "sensors.gas", _GAS_KEYS)
    gas = GasSensorModel(**{k: r.duration(v, f"sensors.gas.{k}") if k == "warmup_duration"
                            else r.number(v, f"sensors.gas.{k}") for k, v in gas_raw.items()})
    if "aqi_breakpoints" in sens:
        bps = []
        for j, pair in enumerate(r.seq(sens["aqi_breakpoints"], "sensors.aqi_breakpoints")):
            if not (isinstance(pair, list) and len(pair) == 2):
                r.errors.append(f"sensors.aqi_breakpoints[{j}]: expected [ppm, index]")
                continue
            bps.append((r.number(pair[0], f"sensors.aqi_breakpoints[{j}][0]", 0.0),
                        r.number(pair[1], f"sensors.aqi_breakpoints[{j}][1]", 0.0)))
        aqi = AqiMapping(tuple(bps))
    else:
        aqi = AqiMapping.default(gas.r0_baseline_ppm)
    sc.sensors = SensorSuite(
        gas=gas, aqi=aqi,
        temp_sigma=r.number(sens.get("temp_sigma"), "sensors.temp_sigma", 0.0),
        humidity_sigma=r.number(sens.get("humidity_sigma"), "sensors.humidity_sigma", 0.0),
    )

    pw = r.mapping(top.get("power"), "power", _POWER_KEYS)
    preset = r.string(pw.pop("preset", None), "power.preset", "xbee_s2")
    if preset not in PRESETS:
        r.errors.append(f"power.preset: unknown preset {preset!r} (choose from {', '.join(sorted(PRESETS))})")
        preset = "xbee_s2"
    sc.power_preset = preset
    sc.power = power_profile(preset, **{k: r.number(v, f"power.{k}") for k, v in pw.items()})

    base = _read_node_settings(r, r.mapping(top.get("node_defaults"), "node_defaults", _DEFAULT_KEYS),
                               "node_defaults", {})
    role_base = {}
    rd = r.mapping(top.get("role_defaults"), "role_defaults", {x.value for x in Role})
    for role_name, raw in rd.items():
        role_base[role_name] = _read_node_settings(
            r, r.mapping(raw, f"role_defaults.{role_name}", _DEFAULT_KEYS), f"role_defaults.{role_name}", base)

    for i, raw in enumerate(r.seq(top.get("nodes"), "nodes")):
        p = f"nodes[{i}]"
        m = r.mapping(raw, p, _NODE_KEYS, required=("node_id", "role"))
        try:
            role = Role(m.get("role", "router"))
        except ValueError:
            r.errors.append(f"{p}.role: expected one of coordinator, router, end_device; got {m.get('role')!r}")
            role = Role.ROUTER
        kw = _read_node_settings(r, m, p, role_base.get(role.value, base))
        parent_id = r.string(m.get("parent"), f"{p}.parent")
        if parent_id is None:
            kw.pop("link", None)  # no uplink to describe
        sc.nodes.append(NodeConfig(
            node_id=r.string(m.get("node_id"), f"{p}.node_id", f"node{i}"),
            role=role,
            room_id=r.string(m.get("room"), f"{p}.room"),
            parent_id=parent_id,
            **kw,
        ))

    for i, raw in enumerate(r.seq(top.get("requests"), "requests")):
        p = f"requests[{i}]"
        m = r.mapping(raw, p, {"time", "target"}, required=("time", "target"))
        sc.requests.append((r.duration(m.get("time"), f"{p}.time", 0.0), r.string(m.get("target"), f"{p}.target", "")))

    if r.errors:
        raise ScenarioError(r.errors)
    return sc.validate()


def parse_duration(value) -> float:
    """Seconds from a number or a suffixed string such as ``"15m"`` or ``"30d"``."""
    r = _Reader()
    v = r.duration(value, "duration")
    if r.errors or v is None:
        raise ValueError(f"invalid duration {value!r}")
    return v


def load_scenario_text(text: str, source: str | None = None) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ScenarioParseError(exc.problem or str(exc), line, col, source) from exc
    except yaml.YAMLError as exc:
        raise ScenarioParseError(str(exc), source=source) from exc
    return scenario_from_dict(doc, source)


def resolve_scenario_path(name_or_path: str | Path) -> Path:
    """A shipped preset name (``paper-default``) or a filesystem path."""
    p = Path(name_or_path)
    if str(name_or_path) in PRESET_NAMES and not p.exists():
        return Path(str(resources.files("iaqsim") / "scenarios" / f"{name_or_path}.yaml"))
    return p


def load_scenario(name_or_path: str | Path) -> Scenario:
    path = resolve_scenario_path(name_or_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario: {exc.strerror or exc}", source=str(path)) from exc
    return load_scenario_text(text, str(path))


# ---------------------------------------------------------------- dumping

def _tod(seconds: float) -> str:
    s = int(round(seconds))
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}" + (f":{s % 60:02d}" if s % 60 else "")


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully resolved document; ``scenario_from_dict(scenario_to_dict(s)) == s``."""
    base_power = power_profile(sc.power_preset) if sc.power_preset != "lilypad_xbee" else PowerProfile(radio_active_ma=None)
    power = {"preset": sc.power_preset}
    for f in dataclasses.fields(PowerProfile):
        v = getattr(sc.power, f.name)
        if v != getattr(base_power, f.name):
            power[f.name] = v
    events = []
    for ev in sc.events:
        d = {"room_id": ev.room_id, "start": _tod(ev.start), "end": _tod(ev.end),
             "temp_boost": ev.temp_boost, "gas_boost": ev.gas_boost, "recurrence": ev.recurrence}
        if ev.day is not None:
            d["date"] = (sc.start_date + dt.timedelta(days=ev.day)).isoformat()
        events.append(d)
    nodes = []
    for n in sc.nodes:
        d = {"node_id": n.node_id, "role": n.role.value}
        if n.room_id is not None:
            d["room"] = n.room_id
        if n.parent_id is not None:
            d["parent"] = n.parent_id
            d["link"] = dataclasses.asdict(n.link)
        for key, attr in _NODE_TUNABLES.items():
            d[key] = getattr(n, attr)
        d["thresholds"] = dataclasses.asdict(n.thresholds)
        nodes.append(d)
    return {
        "name": sc.name,
        "description": sc.description,
        "start_date": sc.start_date.isoformat(),
        "duration": sc.duration,
        "master_seed": sc.master_seed,
        "rooms": [dataclasses.asdict(r) for r in sc.rooms],
        "events": events,
        "sensors": {
            "gas": dataclasses.asdict(sc.sensors.gas),
            "aqi_breakpoints": [list(bp) for bp in sc.sensors.aqi.breakpoints],
            "temp_sigma": sc.sensors.temp_sigma,
            "humidity_sigma": sc.sensors.humidity_sigma,
        },
        "power": power,
        "nodes": nodes,
        "requests": [{"time": t, "target": target} for t, target in sc.requests],
    }


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)
