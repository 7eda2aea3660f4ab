import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iaqsim.environment import EnvReading
from iaqsim.sensors import (
    AqiMapping, GasSensorModel, SensorDomainError, SensorSuite, WarmupError, aqi_from_gas, gas_ratio,
    ppm_from_ratio, read_sensors,
)

MAPPING = AqiMapping.default(400.0)


def test_ratio_at_baseline_is_one():
    assert gas_ratio(GasSensorModel(), 400.0) == 1.0


def test_ratio_power_law():
    assert gas_ratio(GasSensorModel(exponent=-1.0), 800.0) == 0.5
    assert gas_ratio(GasSensorModel(exponent=-0.5), 1600.0) == 0.5


@pytest.mark.parametrize("gas", [0.0, -3.0])
def test_ratio_domain(gas):
    with pytest.raises(SensorDomainError):
        gas_ratio(GasSensorModel(), gas)


@given(st.floats(1.0, 1e5))
def test_ratio_inverts(gas):
    m = GasSensorModel()
    assert ppm_from_ratio(m, gas_ratio(m, gas)) == pytest.approx(gas, rel=1e-12)


def test_default_breakpoints():
    assert MAPPING.breakpoints == ((400, 50), (800, 100), (1200, 150), (1600, 200), (2000, 300))


@pytest.mark.parametrize("c,i", MAPPING.breakpoints)
def test_aqi_at_breakpoints(c, i):
    assert aqi_from_gas(MAPPING, c) == i


def test_aqi_midpoint_and_clamps():
    assert aqi_from_gas(MAPPING, 1800.0) == 250.0
    assert aqi_from_gas(MAPPING, 600.0) == 75.0
    assert aqi_from_gas(MAPPING, 10.0) == 50.0
    assert aqi_from_gas(MAPPING, 1e6) == 300.0


def _oracle_aqi(bps, gas):
    # straight linear scan, no bisection
    if gas <= bps[0][0]:
        return bps[0][1]
    for (c0, i0), (c1, i1) in zip(bps, bps[1:]):
        if c0 <= gas <= c1:
            return i0 + (i1 - i0) * (gas - c0) / (c1 - c0)
    return bps[-1][1]


def test_aqi_against_scan_oracle():
    gas = np.random.default_rng(11).uniform(0, 2500, 1000)
    for g in gas.tolist():
        assert aqi_from_gas(MAPPING, g) == pytest.approx(_oracle_aqi(MAPPING.breakpoints, g), rel=1e-9)


@given(st.floats(0, 5000), st.floats(0, 5000))
def test_aqi_monotone(a, b):
    lo, hi = sorted((a, b))
    assert aqi_from_gas(MAPPING, lo) <= aqi_from_gas(MAPPING, hi)


def test_mapping_validation():
    assert AqiMapping(((400, 50), (300, 100))).violations()
    assert AqiMapping(()).violations()
    assert not MAPPING.violations()


ENV = EnvReading("office", 0.0, 22.5, 45.0, 400.0)


def test_read_before_warmup_raises():
    suite = SensorSuite(GasSensorModel(warmup_duration=30.0))
    with pytest.raises(WarmupError):
        read_sensors(10.0, ENV, suite, np.random.default_rng(0))


def test_zero_noise_is_identity():
    f = read_sensors(30.0, ENV, SensorSuite(), np.random.default_rng(0))
    assert f.temp == ENV.temp
    assert f.humidity == ENV.humidity
    assert f.aqi == aqi_from_gas(MAPPING, 400.0) == 50.0
    assert f.gas_ratio == 1.0


def test_noisy_read_is_deterministic():
    suite = SensorSuite(GasSensorModel(measurement_sigma=10.0), temp_sigma=0.2, humidity_sigma=1.0)
    a = read_sensors(60.0, ENV, suite, np.random.default_rng(5))
    b = read_sensors(60.0, ENV, suite, np.random.default_rng(5))
    assert a == b
    assert a.temp != ENV.temp


def test_model_validation():
    assert GasSensorModel(exponent=0.3).violations()
    assert GasSensorModel(r0_baseline_ppm=0).violations()
