import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iaqsim.environment import (
    DAY_S, ActivityEvent, RoomProfile, active_events, diurnal, sample_environment,
)

H = 3600.0
KITCHEN = RoomProfile("kitchen", base_temp=23.0, temp_diurnal_amplitude=2.0, base_gas=450.0)
COOKING = ActivityEvent("kitchen", 13 * H, 18 * H, temp_boost=5.0, gas_boost=500.0)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_diurnal_shape():
    assert diurnal(15 * H) == pytest.approx(1.0)
    assert diurnal(9 * H) == pytest.approx(0.0, abs=1e-15)
    assert diurnal(3 * H) == pytest.approx(-1.0)
    assert diurnal(15 * H + 7 * DAY_S) == pytest.approx(1.0)


def test_kitchen_cooking_at_three_pm():
    r = sample_environment(KITCHEN, [COOKING], 15 * H, rng())
    assert r.temp == pytest.approx(23.0 + 2.0 * 1.0 + 5.0, abs=1e-12)
    assert r.gas == 450.0 + 500.0


def test_bedroom_at_zero_crossing_is_base():
    bedroom = RoomProfile("bedroom", base_temp=21.0, temp_diurnal_amplitude=1.0)
    r = sample_environment(bedroom, [], 9 * H, rng())
    assert r.temp == pytest.approx(21.0, abs=1e-12)


def test_gas_outside_window_is_base():
    r = sample_environment(KITCHEN, [COOKING], 3 * H, rng())
    assert r.gas == KITCHEN.base_gas


def test_event_window_boundaries():
    assert active_events([COOKING], 13 * H) == [COOKING]
    assert active_events([COOKING], 18 * H) == []
    assert active_events([COOKING], 18 * H - 0.001) == [COOKING]
    assert active_events([], 12345.0) == []


def test_one_off_event_only_on_its_day():
    once = ActivityEvent("kitchen", 19 * H, 19.5 * H, gas_boost=1600.0, day=9)
    assert once.recurrence == "once"
    assert COOKING.recurrence == "daily"
    assert not once.contains(19 * H)
    assert once.contains(9 * DAY_S + 19 * H)
    assert not once.contains(10 * DAY_S + 19 * H)


def test_events_for_other_rooms_ignored():
    other = ActivityEvent("office", 0, DAY_S, temp_boost=10.0)
    a = sample_environment(KITCHEN, [other], 3 * H, rng())
    b = sample_environment(KITCHEN, [], 3 * H, rng())
    assert a == b


def test_deterministic_given_stream_state():
    noisy = RoomProfile("x", noise_sigma_temp=0.5, noise_sigma_gas=20.0, noise_sigma_humidity=1.0)
    a = sample_environment(noisy, [COOKING], 1000.0, rng(7))
    b = sample_environment(noisy, [COOKING], 1000.0, rng(7))
    assert a == b


def test_three_draws_regardless_of_sigmas():
    g1, g2 = rng(3), rng(3)
    sample_environment(KITCHEN, [], 0.0, g1)
    g2.standard_normal(3)
    assert g1.random() == g2.random()


def test_overlapping_events_superpose():
    e2 = ActivityEvent("kitchen", 14 * H, 16 * H, temp_boost=1.5, gas_boost=100.0)
    r = sample_environment(KITCHEN, [COOKING, e2], 15 * H, rng())
    assert r.temp == pytest.approx(23.0 + 2.0 + 5.0 + 1.5)
    assert r.gas == pytest.approx(450.0 + 600.0)


@given(st.floats(0, 30 * DAY_S))
def test_day_periodicity(t):
    a = sample_environment(KITCHEN, [COOKING], t, rng())
    b = sample_environment(KITCHEN, [COOKING], t + DAY_S, rng())
    assert math.isclose(a.temp, b.temp, abs_tol=1e-9)
    # contains() works on time of day, so the window can differ only at float edges
    if COOKING.contains(t) == COOKING.contains(t + DAY_S):
        assert a.gas == b.gas


@settings(max_examples=200)
@given(st.floats(-50, 150), st.floats(0, 200), st.integers(0, 2**32))
def test_humidity_clamped_and_gas_non_negative(base_h, sigma, seed):
    p = RoomProfile("x", base_humidity=min(100.0, max(0.0, base_h)), noise_sigma_humidity=sigma,
                    humidity_diurnal_amplitude=20.0, base_gas=0.0, noise_sigma_gas=sigma)
    r = sample_environment(p, [], seed % int(DAY_S), rng(seed))
    assert 0.0 <= r.humidity <= 100.0
    assert r.gas >= 0.0


def test_profile_and_event_validation():
    assert RoomProfile("x", base_humidity=120).violations()
    assert RoomProfile("x", noise_sigma_gas=-1).violations()
    assert ActivityEvent("x", 18 * H, 13 * H).violations()
    assert ActivityEvent("x", 0, H, day=-1).violations()
    assert not COOKING.violations()
