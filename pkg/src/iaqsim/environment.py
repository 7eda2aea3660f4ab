"""Ground-truth room signals: temperature, humidity and pollutant level."""

from __future__ import annotations

import math
from dataclasses import dataclass

DAY_S = 86_400.0
# Diurnal temperature peaks mid-afternoon; humidity moves the other way.
DIURNAL_PEAK_S = 15 * 3600.0


@dataclass(frozen=True)
class RoomProfile:
    room_id: str
    base_temp: float = 22.0
    temp_diurnal_amplitude: float = 1.5
    base_humidity: float = 45.0
    base_gas: float = 400.0
    noise_sigma_temp: float = 0.0
    noise_sigma_gas: float = 0.0
    humidity_diurnal_amplitude: float = 0.0
    noise_sigma_humidity: float = 0.0

    def violations(self) -> list[str]:
        out = []
        if not 0.0 <= self.base_humidity <= 100.0:
            out.append(f"base_humidity must be in [0, 100], got {self.base_humidity}")
        if self.base_gas < 0:
            out.append(f"base_gas must be >= 0, got {self.base_gas}")
        for name in ("noise_sigma_temp", "noise_sigma_gas", "noise_sigma_humidity"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0, got {getattr(self, name)}")
        return out


@dataclass(frozen=True)
class ActivityEvent:
    """A boost applied to one room during a time-of-day window.

    ``start`` and ``end`` are seconds after midnight.  ``day`` is ``None`` for a
    daily event, or the zero-based simulation day of a one-off event.
    """

    room_id: str
    start: float
    end: float
    temp_boost: float = 0.0
    gas_boost: float = 0.0
    day: int | None = None

    @property
    def recurrence(self) -> str:
        return "daily" if self.day is None else "once"

    def violations(self) -> list[str]:
        out = []
        if not 0.0 <= self.start < self.end <= DAY_S:
            out.append(f"window must satisfy 00:00 <= start < end <= 24:00, got {self.start}..{self.end} s")
        if self.temp_boost < 0 or self.gas_boost < 0:
            out.append("boosts must be >= 0")
        if self.day is not None and self.day < 0:
            out.append(f"one-off event day must not precede the scenario start (day {self.day})")
        return out

    def contains(self, t: float) -> bool:
        day, tod = divmod(t, DAY_S)
        if self.day is not None and int(day) != self.day:
            return False
        return self.start <= tod < self.end


@dataclass(frozen=True, slots=True)
class EnvReading:
    room_id: str
    t: float
    temp: float
    humidity: float
    gas: float


def active_events(events, t: float) -> list[ActivityEvent]:
    """Events whose window holds ``t`` (start inclusive, end exclusive)."""
    return [ev for ev in events if ev.contains(t)]


def diurnal(t: float) -> float:
    """Unit sinusoid with a 24 h period, +1 at 15:00 and zero at 09:00 / 21:00."""
    tod = t % DAY_S
    return math.sin(2.0 * math.pi * ((tod - DIURNAL_PEAK_S) / DAY_S + 0.25))


def sample_environment(profile: RoomProfile, events, t: float, rng) -> EnvReading:
    """Ground truth for ``profile`` at ``t`` seconds after the scenario start.

    Exactly three standard normals are drawn from ``rng`` per call regardless of
    the sigmas, so the stream position never depends on parameter values.
    """
    d = diurnal(t)
    temp = profile.base_temp + profile.temp_diurnal_amplitude * d
    humidity = profile.base_humidity - profile.humidity_diurnal_amplitude * d
    gas = profile.base_gas
    for ev in events:
        if ev.room_id == profile.room_id and ev.contains(t):
            temp += ev.temp_boost
            gas += ev.gas_boost
    z_temp, z_hum, z_gas = rng.standard_normal(3).tolist()
    temp += profile.noise_sigma_temp * z_temp
    humidity += profile.noise_sigma_humidity * z_hum
    gas += profile.noise_sigma_gas * z_gas
    return EnvReading(
        room_id=profile.room_id,
        t=t,
        temp=temp,
        humidity=min(100.0, max(0.0, humidity)),
        gas=max(0.0, gas),
    )
