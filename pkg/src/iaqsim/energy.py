"""Per-node energy accounting from component power draws.

Draws come from the node's bill of materials: an MQ-135 gas sensor (~900 mW),
a humidity sensor (< 900 mW, modelled at 200 mW), an LM36 temperature sensor
(80 uA), an XBee series 2 radio (40 mA) and an ATtiny85 MCU (300 uA).
Current-rated parts are converted with ``P = V * I`` on the logic rail; the two
heated sensors sit on the 5 V rail.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from functools import cached_property

COMPONENTS = ("gas", "humidity", "temp", "radio", "mcu")
SENSOR_COMPONENTS = ("gas", "humidity", "temp")
POWER_STATES = ("active", "sleep", "airtime")

TICKS_PER_S = 1000


class EnergyError(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerProfile:
    gas_sensor_active_mw: float = 900.0
    humidity_sensor_active_mw: float = 200.0
    temp_sensor_active_ua: float = 80.0
    radio_active_ma: float | None = 40.0
    mcu_active_ua: float = 300.0
    supply_voltage_logic: float = 3.3
    supply_voltage_gas: float = 5.0
    gas_sleep_ua: float = 0.0
    humidity_sleep_ua: float = 0.0
    temp_sleep_ua: float = 0.0
    radio_sleep_ua: float = 1.0
    mcu_sleep_ua: float = 0.5
    airtime_s: float = 0.010

    def violations(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                if f.name == "radio_active_ma":
                    out.append("radio_active_ma is unset for this radio preset; give an explicit override")
                continue
            if v < 0:
                out.append(f"{f.name} must be >= 0, got {v}")
        if self.radio_active_ma is not None:
            for comp in COMPONENTS:
                if self.power_w(comp, "sleep") > self.power_w(comp, "active"):
                    out.append(f"{comp}: sleep draw exceeds active draw")
        return out

    @cached_property
    def _table(self) -> dict:
        out = {}
        for comp in COMPONENTS:
            for state in POWER_STATES:
                try:
                    out[comp, state] = self._power_w(comp, state)
                except EnergyError:
                    pass
        return out

    def power_w(self, component: str, state: str) -> float:
        try:
            return self._table[component, state]
        except KeyError:
            return self._power_w(component, state)

    def _power_w(self, component: str, state: str) -> float:
        v_logic, v_gas = self.supply_voltage_logic, self.supply_voltage_gas
        if state == "sleep":
            ua = {
                "gas": (self.gas_sleep_ua, v_gas),
                "humidity": (self.humidity_sleep_ua, v_gas),
                "temp": (self.temp_sleep_ua, v_logic),
                "radio": (self.radio_sleep_ua, v_logic),
                "mcu": (self.mcu_sleep_ua, v_logic),
            }[component]
            return ua[0] * 1e-6 * ua[1]
        if state not in ("active", "airtime"):
            raise ValueError(f"unknown power state {state!r}")
        if component == "gas":
            return self.gas_sensor_active_mw * 1e-3
        if component == "humidity":
            return self.humidity_sensor_active_mw * 1e-3
        if component == "temp":
            return self.temp_sensor_active_ua * 1e-6 * v_logic
        if component == "radio":
            if self.radio_active_ma is None:
                raise EnergyError("radio_active_ma is unset for this radio preset")
            return self.radio_active_ma * 1e-3 * v_logic
        if component == "mcu":
            return self.mcu_active_ua * 1e-6 * v_logic
        raise ValueError(f"unknown component {component!r}")


# The LilyPad XBee has no published draw; selecting it requires radio_active_ma.
PRESETS = {
    "xbee_s2": {},
    "xbee_pro": {"radio_active_ma": 62.0},
    "lilypad_xbee": {"radio_active_ma": None},
}


def power_profile(preset: str = "xbee_s2", **overrides) -> PowerProfile:
    if preset not in PRESETS:
        raise KeyError(f"unknown power preset {preset!r}; choose from {sorted(PRESETS)}")
    profile = replace(PowerProfile(), **PRESETS[preset])
    return replace(profile, **overrides)


@dataclass
class EnergyLedger:
    node_id: str
    energy_j: dict = field(default_factory=lambda: dict.fromkeys(COMPONENTS, 0.0))
    time_s: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return sum(self.energy_j.values())

    def breakdown(self) -> dict:
        return dict(self.energy_j)


def accrue(ledger: EnergyLedger, component: str, power_state: str, duration: float,
           profile: PowerProfile) -> EnergyLedger:
    """Charge ``duration`` seconds of ``component`` in ``power_state`` to the ledger."""
    if not duration >= 0:
        raise EnergyError(f"negative duration {duration} for {ledger.node_id}/{component}")
    if duration == 0:
        return ledger
    ledger.energy_j[component] += profile.power_w(component, power_state) * duration
    key = (component, power_state)
    ledger.time_s[key] = ledger.time_s.get(key, 0.0) + duration
    return ledger


class PowerTracker:
    """Turns powered intervals (in ticks) into ledger charges.

    Intervals must be reported in non-decreasing order of their start tick.
    Overlapping intervals of the same component are charged once; gaps are
    charged at the sleep draw.  Airtime is charged on top at the active draw.
    """

    def __init__(self, ledger: EnergyLedger, profile: PowerProfile, components=COMPONENTS):
        self.ledger = ledger
        self.profile = profile
        self.cursor = dict.fromkeys(components, 0)

    def powered(self, component: str, start: int, end: int) -> None:
        c = self.cursor[component]
        if start > c:
            accrue(self.ledger, component, "sleep", (start - c) / TICKS_PER_S, self.profile)
            c = start
        if end > c:
            accrue(self.ledger, component, "active", (end - c) / TICKS_PER_S, self.profile)
            c = end
        self.cursor[component] = c

    def airtime(self, frames: int = 1, component: str = "radio") -> None:
        accrue(self.ledger, component, "airtime", frames * self.profile.airtime_s, self.profile)

    def finish(self, horizon: int) -> None:
        for component, c in self.cursor.items():
            if c > horizon:
                raise EnergyError(f"{component} charged past the horizon ({c} > {horizon})")
            accrue(self.ledger, component, "sleep", (horizon - c) / TICKS_PER_S, self.profile)
            self.cursor[component] = horizon


def node_energy_over(result, node_id: str, horizon: float | None = None) -> tuple[float, dict]:
    """Total joules and per-component breakdown for ``node_id`` in a finished run."""
    if node_id not in result.ledgers:
        raise KeyError(f"unknown node {node_id!r}")
    if horizon is not None and abs(horizon - result.horizon_s) > 1e-9:
        raise ValueError(f"run covers {result.horizon_s} s, not {horizon} s")
    ledger = result.ledgers[node_id]
    return ledger.total, ledger.breakdown()
