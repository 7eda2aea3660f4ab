"""Parameter sweeps over scenario knobs with reproducible replica seeds."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor

from .energy import PowerProfile
from .engine import run
from .network import Role
from .node import Thresholds
from .rng import derive_seed
from .scenario import Scenario


class SweepError(ValueError):
    pass


def _nodes(sc: Scenario, pred, **changes) -> Scenario:
    nodes = [dataclasses.replace(n, **changes) if pred(n) else n for n in sc.nodes]
    return dataclasses.replace(sc, nodes=nodes)


def _set_link(attr):
    def setter(sc, v):
        return dataclasses.replace(sc, nodes=[
            dataclasses.replace(n, link=dataclasses.replace(n.link, **{attr: v})) if n.parent_id else n
            for n in sc.nodes
        ])
    return setter


def _set_gas(attr):
    def setter(sc, v):
        gas = dataclasses.replace(sc.sensors.gas, **{attr: v})
        return dataclasses.replace(sc, sensors=dataclasses.replace(sc.sensors, gas=gas))
    return setter


def _set_gas_duty(sc, fraction):
    periods = {n.sampling_period_t for n in sc.nodes if n.senses}
    if len(periods) != 1:
        raise SweepError("gas.duty_fraction needs one common sampling period across sensing nodes")
    if not 0 <= fraction <= 1:
        raise SweepError(f"gas.duty_fraction must be in [0, 1], got {fraction}")
    return _set_gas("warmup_duration")(sc, fraction * periods.pop())


def _set_nodes(attr, role=None):
    def setter(sc, v):
        if role is None:
            return _nodes(sc, lambda n: n.senses, **{attr: v})
        return _nodes(sc, lambda n: n.role == role, **{attr: v})
    return setter


def _set_power(attr):
    def setter(sc, v):
        return dataclasses.replace(sc, power=dataclasses.replace(sc.power, **{attr: v}))
    return setter


def _set_threshold(attr):
    def setter(sc, v):
        return dataclasses.replace(sc, nodes=[
            dataclasses.replace(n, thresholds=dataclasses.replace(n.thresholds, **{attr: v})) for n in sc.nodes
        ])
    return setter


SWEEP_PARAMS = {
    "duration": lambda sc, v: dataclasses.replace(sc, duration=v),
    "link.delivery_probability": _set_link("delivery_probability"),
    "link.latency": _set_link("latency"),
    "gas.duty_fraction": _set_gas_duty,
    "sensors.gas.warmup_duration": _set_gas("warmup_duration"),
    "sensors.gas.measurement_sigma": _set_gas("measurement_sigma"),
    "node.sampling_period": _set_nodes("sampling_period_t"),
    "node.reporting_interval": _set_nodes("reporting_interval"),
    "router.wake_interval": _set_nodes("wake_interval", Role.ROUTER),
    "router.awake_window": _set_nodes("awake_window", Role.ROUTER),
    "end_device.wake_interval": _set_nodes("wake_interval", Role.END_DEVICE),
    "end_device.awake_window": _set_nodes("awake_window", Role.END_DEVICE),
}
SWEEP_PARAMS.update({f"thresholds.{f.name}": _set_threshold(f.name) for f in dataclasses.fields(Thresholds)})
SWEEP_PARAMS.update({
    f"power.{f.name}": _set_power(f.name) for f in dataclasses.fields(PowerProfile)
})


def apply_param(sc: Scenario, param: str, value: float) -> Scenario:
    if param not in SWEEP_PARAMS:
        raise SweepError(f"unknown sweep parameter {param!r}; valid: {', '.join(sorted(SWEEP_PARAMS))}")
    return SWEEP_PARAMS[param](sc, value).validate()


def replica_seed(master_seed: int, replica: int) -> int:
    return derive_seed(master_seed, "replica", replica)


def _one(job):
    sc, param, value, replica, seed = job
    res = run(sc, seed=seed, keep_records=False)
    m = res.metrics
    row = {"param": param, "value": value, "replica": replica, "seed": seed,
           "throughput": m.throughput, "generated": sum(m.generated.values()),
           "delivered": sum(m.delivered.values())}
    for nid in sorted(m.energy_j):
        row[f"energy_j.{nid}"] = m.energy_j[nid]
    for nid in sorted(m.energy_j):
        row[f"gas_j.{nid}"] = m.energy_breakdown[nid]["gas"]
    return row


def sweep(sc: Scenario, param: str, values, replicas: int = 1, *, jobs: int = 1) -> list[dict]:
    """One row per (value, replica).  Replica ``r`` uses the same seed for every value."""
    if replicas < 1:
        raise SweepError("replicas must be >= 1")
    work = []
    for value in values:
        variant = apply_param(sc, param, value)
        for r in range(replicas):
            work.append((variant, param, value, r, replica_seed(sc.master_seed, r)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_one, work))
    return [_one(w) for w in work]
