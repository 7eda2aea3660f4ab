"""Evaluation quantities computed from the event log.

Two routes produce the same numbers: :class:`MetricsCollector` folds records
in as the engine emits them (constant memory for month-long runs), and the
module-level functions recount from a list of raw records.  Tests hold the two
against each other.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

DAY_MS = 86_400_000
HOUR_MS = 3_600_000
GENERATED_KINDS = frozenset({"alert_tx", "aggregate_tx", "reply"})
REPORT_MSGS = frozenset({"alert", "aggregate", "reply"})
QUANTITIES = ("temp", "humidity", "aqi")


@dataclass
class Metrics:
    generated: dict
    delivered: dict
    throughput: float | None
    throughput_daily: list  # (day, generated, delivered, ratio | None)
    energy_j: dict
    energy_breakdown: dict
    hourly: dict  # room -> day -> quantity -> 24 means (None = no samples)
    daily_aqi: dict  # room -> list of per-day means
    losses: dict = field(default_factory=dict)
    alerts: dict = field(default_factory=dict)
    n_days: int = 0

    def summary(self) -> dict:
        return {
            "throughput": self.throughput,
            "generated": sum(self.generated.values()),
            "delivered": sum(self.delivered.values()),
            "generated_by_node": dict(sorted(self.generated.items())),
            "delivered_by_node": dict(sorted(self.delivered.items())),
            "alerts_by_node": dict(sorted(self.alerts.items())),
            "losses_by_reason": dict(sorted(self.losses.items())),
            "energy_j": {k: self.energy_j[k] for k in sorted(self.energy_j)},
        }


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


class MetricsCollector:
    def __init__(self, scenario):
        self.n_days = scenario.n_days
        self.rooms = sorted({n.room_id for n in scenario.nodes if n.senses})
        self.nodes = sorted(n.node_id for n in scenario.nodes)
        self.generated = Counter()
        self.delivered = Counter()
        self.alerts = Counter()
        self.losses = Counter()
        self.day_gen = Counter()
        self.day_del = Counter()
        # (room, day, hour) -> [n, sum temp, sum humidity, sum aqi]
        self.buckets = defaultdict(lambda: [0, 0.0, 0.0, 0.0])

    def add(self, rec) -> None:
        kind = rec.kind
        if kind == "sample":
            b = self.buckets[(rec.room, rec.t // DAY_MS, rec.t % DAY_MS // HOUR_MS)]
            b[0] += 1
            b[1] += rec.temp
            b[2] += rec.humidity
            b[3] += rec.aqi
        elif kind in GENERATED_KINDS:
            self.generated[rec.node] += 1
            self.day_gen[rec.t // DAY_MS] += 1
            if kind == "alert_tx":
                self.alerts[rec.node] += 1
        elif kind == "delivery" and rec.msg in REPORT_MSGS:
            self.delivered[rec.origin] += 1
            self.day_del[rec.created // DAY_MS] += 1
        elif kind == "loss":
            self.losses[rec.info] += 1

    def hourly(self, room: str, day: int) -> dict:
        out = {q: [None] * 24 for q in QUANTITIES}
        for hour in range(24):
            b = self.buckets.get((room, day, hour))
            if b and b[0]:
                for i, q in enumerate(QUANTITIES, start=1):
                    out[q][hour] = b[i] / b[0]
        return out

    def daily_aqi(self, room: str) -> list:
        out = []
        for day in range(self.n_days):
            n = s = 0
            for hour in range(24):
                b = self.buckets.get((room, day, hour))
                if b:
                    n += b[0]
                    s += b[3]
            out.append(s / n if n else None)
        return out

    def finalize(self, ledgers) -> Metrics:
        gen = {n: self.generated.get(n, 0) for n in self.nodes}
        dlv = {n: self.delivered.get(n, 0) for n in self.nodes}
        daily = [(d, self.day_gen[d], self.day_del[d], _ratio(self.day_del[d], self.day_gen[d]))
                 for d in range(self.n_days)]
        return Metrics(
            generated=gen,
            delivered=dlv,
            throughput=_ratio(sum(dlv.values()), sum(gen.values())),
            throughput_daily=daily,
            energy_j={n: led.total for n, led in ledgers.items()},
            energy_breakdown={n: led.breakdown() for n, led in ledgers.items()},
            hourly={r: [self.hourly(r, d) for d in range(self.n_days)] for r in self.rooms},
            daily_aqi={r: self.daily_aqi(r) for r in self.rooms},
            losses=dict(self.losses),
            alerts={n: self.alerts.get(n, 0) for n in self.nodes},
            n_days=self.n_days,
        )


# ---------------------------------------------------------------- recounts over raw records

def throughput(records) -> float | None:
    """Sink-delivered application messages over origin-generated ones; ``None`` if nothing was generated."""
    generated = delivered = 0
    for r in records:
        if r.kind in GENERATED_KINDS:
            generated += 1
        elif r.kind == "delivery" and r.msg in REPORT_MSGS:
            delivered += 1
    return _ratio(delivered, generated)


def hourly_series(records, room: str, day: int, *, rooms=None, n_days: int | None = None) -> dict:
    """Per-hour means of one room's sampled values on ``day`` (0-based)."""
    samples = [r for r in records if r.kind == "sample"]
    known = set(rooms) if rooms is not None else {r.room for r in samples}
    if room not in known:
        raise KeyError(f"unknown room {room!r}")
    last_day = n_days - 1 if n_days is not None else max((r.t // DAY_MS for r in samples), default=-1)
    if not 0 <= day <= last_day:
        raise KeyError(f"day {day} is outside the run (0..{last_day})")
    acc = {q: [[] for _ in range(24)] for q in QUANTITIES}
    for r in samples:
        if r.room == room and r.t // DAY_MS == day:
            h = r.t % DAY_MS // HOUR_MS
            for q in QUANTITIES:
                acc[q][h].append(getattr(r, q))
    return {q: [sum(v) / len(v) if v else None for v in acc[q]] for q in QUANTITIES}


def daily_aqi(records, room: str, n_days: int | None = None) -> list:
    sums, counts = Counter(), Counter()
    last = -1
    for r in records:
        if r.kind == "sample" and r.room == room:
            d = r.t // DAY_MS
            sums[d] += r.aqi
            counts[d] += 1
            last = max(last, d)
    n = n_days if n_days is not None else last + 1
    return [sums[d] / counts[d] if counts[d] else None for d in range(n)]


# ---------------------------------------------------------------- export

def _date(start: dt.date, day: int) -> str:
    return (start + dt.timedelta(days=day)).isoformat()


def _num(x):
    return None if x is None else float(x)


def export_tables(metrics: Metrics, scenario) -> dict:
    """Figure-analogue tables as ``{file stem: (header, rows)}``."""
    start = scenario.start_date
    tables = {}
    tables["throughput_daily"] = (
        ["date", "generated", "delivered", "throughput"],
        [[_date(start, d), g, dl, _num(r)] for d, g, dl, r in metrics.throughput_daily],
    )
    comps = ("gas", "humidity", "temp", "radio", "mcu")
    rows = []
    for n in scenario.nodes:
        br = metrics.energy_breakdown[n.node_id]
        total = metrics.energy_j[n.node_id]
        rows.append([n.node_id, n.role.value, n.room_id or "", _num(total)]
                    + [_num(br[c]) for c in comps] + [_num(total / scenario.duration * 1e3)])
    tables["energy_by_node"] = (
        ["node_id", "role", "room", "total_j"] + [f"{c}_j" for c in comps] + ["mean_power_mw"], rows)
    for room, days in metrics.hourly.items():
        rows = []
        for d, series in enumerate(days):
            for h in range(24):
                stamp = dt.datetime.combine(start + dt.timedelta(days=d), dt.time(h)).isoformat()
                rows.append([stamp] + [_num(series[q][h]) for q in QUANTITIES])
        tables[f"hourly_{room}"] = (["hour_start", "temp_c", "humidity_pct", "aqi"], rows)
    rooms = sorted(metrics.daily_aqi)
    tables["daily_aqi"] = (
        ["date"] + rooms,
        [[_date(start, d)] + [_num(metrics.daily_aqi[r][d]) for r in rooms] for d in range(metrics.n_days)],
    )
    return tables


def write_tables(metrics: Metrics, scenario, out_dir: Path, fmt: str = "csv") -> list[Path]:
    tables = export_tables(metrics, scenario)
    out_dir = Path(out_dir)
    if fmt == "json":
        path = out_dir / "metrics.json"
        doc = {name: [dict(zip(header, row)) for row in rows] for name, (header, rows) in tables.items()}
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return [path]
    written = []
    for name, (header, rows) in tables.items():
        path = out_dir / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)
    return written
