"""What the node's sensors report for a given ground truth.

The gas channel follows the usual metal-oxide power law: the normalised
resistance ratio ``Rs/R0 = (ppm / r0_ppm) ** exponent`` with a negative
exponent, so conductivity rises with pollution.  The node inverts that curve to
estimate ppm and maps the estimate onto an AQI scale by piecewise-linear
interpolation.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .environment import EnvReading


class SensorDomainError(ValueError):
    pass


class WarmupError(RuntimeError):
    """Sensors were read before the heater warm-up completed (a scheduling bug)."""


@dataclass(frozen=True)
class GasSensorModel:
    r0_baseline_ppm: float = 400.0
    exponent: float = -0.42
    warmup_duration: float = 30.0
    measurement_sigma: float = 0.0

    def violations(self) -> list[str]:
        out = []
        if self.r0_baseline_ppm <= 0:
            out.append(f"r0_baseline_ppm must be > 0, got {self.r0_baseline_ppm}")
        if self.exponent >= 0:
            out.append(f"exponent must be < 0, got {self.exponent}")
        if self.warmup_duration < 0:
            out.append(f"warmup_duration must be >= 0, got {self.warmup_duration}")
        if self.measurement_sigma < 0:
            out.append(f"measurement_sigma must be >= 0, got {self.measurement_sigma}")
        return out


@dataclass(frozen=True)
class AqiMapping:
    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple((float(c), float(i)) for c, i in self.breakpoints))
        object.__setattr__(self, "_conc", [c for c, _ in self.breakpoints])

    @classmethod
    def default(cls, baseline_ppm: float = 400.0) -> AqiMapping:
        """Baseline maps to 50, five times baseline to 300."""
        return cls(tuple((k * baseline_ppm, idx) for k, idx in zip((1, 2, 3, 4, 5), (50, 100, 150, 200, 300))))

    def violations(self) -> list[str]:
        if not self.breakpoints:
            return ["AQI mapping needs at least one breakpoint"]
        out = []
        for (c0, i0), (c1, i1) in zip(self.breakpoints, self.breakpoints[1:]):
            if not (c1 > c0 and i1 > i0):
                out.append(f"breakpoints must be strictly increasing: ({c0}, {i0}) -> ({c1}, {i1})")
        return out


@dataclass(frozen=True)
class SensorSuite:
    gas: GasSensorModel = field(default_factory=GasSensorModel)
    aqi: AqiMapping = field(default_factory=AqiMapping.default)
    temp_sigma: float = 0.0
    humidity_sigma: float = 0.0


@dataclass(frozen=True, slots=True)
class SensorFields:
    temp: float
    humidity: float
    aqi: float
    gas_ppm: float
    gas_ratio: float


def gas_ratio(model: GasSensorModel, gas: float) -> float:
    if not gas > 0:
        raise SensorDomainError(f"gas concentration must be > 0 ppm, got {gas}")
    return (gas / model.r0_baseline_ppm) ** model.exponent


def ppm_from_ratio(model: GasSensorModel, ratio: float) -> float:
    """Invert :func:`gas_ratio` (the node-side calibration curve)."""
    if ratio == 1.0:
        return model.r0_baseline_ppm
    return model.r0_baseline_ppm * ratio ** (1.0 / model.exponent)


def aqi_from_gas(mapping: AqiMapping, gas: float) -> float:
    bps = mapping.breakpoints
    if not bps:
        raise ValueError("empty AQI mapping")
    conc = mapping._conc
    if gas <= conc[0]:
        return bps[0][1]
    if gas >= conc[-1]:
        return bps[-1][1]
    k = bisect.bisect_right(conc, gas)
    (c0, i0), (c1, i1) = bps[k - 1], bps[k]
    if gas == c0:
        return i0
    return i0 + (i1 - i0) * (gas - c0) / (c1 - c0)


# Floor for the noisy gas estimate; the power law is undefined at 0 ppm.
_MIN_PPM = 1e-6


def read_sensors(powered_for: float, env: EnvReading, suite: SensorSuite, rng) -> SensorFields:
    """Read temperature, humidity and gas after ``powered_for`` seconds of heater time.

    Draws exactly three standard normals from ``rng``.
    """
    if powered_for < suite.gas.warmup_duration:
        raise WarmupError(
            f"sensors powered for {powered_for:g} s, warm-up needs {suite.gas.warmup_duration:g} s"
        )
    z_temp, z_hum, z_gas = rng.standard_normal(3).tolist()
    noisy_gas = max(_MIN_PPM, env.gas + suite.gas.measurement_sigma * z_gas)
    ratio = gas_ratio(suite.gas, noisy_gas)
    estimate = ppm_from_ratio(suite.gas, ratio)
    return SensorFields(
        temp=env.temp + suite.temp_sigma * z_temp,
        humidity=min(100.0, max(0.0, env.humidity + suite.humidity_sigma * z_hum)),
        aqi=aqi_from_gas(suite.aqi, estimate),
        gas_ppm=estimate,
        gas_ratio=ratio,
    )
