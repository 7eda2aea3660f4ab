import csv
import json
import statistics

import pytest

from iaqsim.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_USAGE, main

TWO_COORDS = """\
name: broken
duration: 1h
rooms: [{room_id: office}]
nodes:
  - {node_id: sink, role: coordinator}
  - {node_id: sink2, role: coordinator}
  - {node_id: office, role: router, room: office, parent: sink}
"""


def test_validate_default(capsys):
    assert main(["validate", "paper-default"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok: paper-default")


def test_validate_two_coordinators(tmp_path, capsys):
    f = tmp_path / "s.yaml"
    f.write_text(TWO_COORDS)
    assert main(["validate", "--scenario", str(f)]) == EXIT_INVALID
    assert "multiple coordinators" in capsys.readouterr().err


def test_validate_unknown_key(tmp_path, capsys):
    f = tmp_path / "s.yaml"
    f.write_text(TWO_COORDS.replace("duration: 1h", "durration: 1h"))
    assert main(["validate", str(f)]) == EXIT_INVALID
    assert "durration" in capsys.readouterr().err


def test_validate_parse_error(tmp_path, capsys):
    f = tmp_path / "s.yaml"
    f.write_text("name: x\nrooms: [\n")
    assert main(["validate", str(f)]) == EXIT_IO
    err = capsys.readouterr().err
    assert f"{f}:" in err


def test_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "nope.yaml")]) == EXIT_IO


def _files(d):
    return {p.name: p.read_bytes() for p in d.iterdir() if p.is_file()}


def test_run_twice_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "--duration", "6h", "--seed", "42", "--out", str(out)]) == EXIT_OK
    fa, fb = _files(a), _files(b)
    assert fa.keys() == fb.keys()
    for name in fa:
        if name != "manifest.json":
            assert fa[name] == fb[name], name
    ma, mb = json.loads(fa["manifest.json"]), json.loads(fb["manifest.json"])
    for volatile in ("wall_clock_s", "out_dir", "rerun"):
        ma.pop(volatile), mb.pop(volatile)
    assert ma == mb
    assert ma["seed"] == 42
    summary = json.loads(fa["summary.json"])
    assert 0.0 <= summary["throughput"] <= 1.0
    assert "throughput" in capsys.readouterr().out


def test_run_reproducible_from_snapshot(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--duration", "3h", "--seed", "7", "--out", str(a)]) == EXIT_OK
    assert main(["run", str(a / "scenario.yaml"), "--out", str(b)]) == EXIT_OK
    assert (a / "events.csv").read_bytes() == (b / "events.csv").read_bytes()


def test_run_json_format(tmp_path):
    assert main(["run", "--duration", "2h", "--format", "json", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert "energy_by_node" in doc


def test_run_default_out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("IAQSIM_OUT_ROOT", str(tmp_path))
    assert main(["run", "lossless", "--duration", "1h", "--seed", "3"]) == EXIT_OK
    assert (tmp_path / "lossless-run-seed3" / "manifest.json").is_file()


def test_unwritable_out_dir_fails_before_running(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--duration", "1h", "--out", str(blocker / "sub")]) == EXIT_IO
    captured = capsys.readouterr()
    assert "not writable" in captured.err
    assert "throughput" not in captured.out


def test_bad_arguments():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--seed", "-4"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["run", "--duration", "soon"])


def _sweep(tmp_path, *args):
    assert main(["sweep", "--out", str(tmp_path), *args]) == EXIT_OK
    with (tmp_path / "sweep.csv").open() as fh:
        return list(csv.DictReader(fh))


def test_sweep_link_probability_monotone(tmp_path):
    rows = _sweep(tmp_path, "--param", "link.delivery_probability", "--values", "1.0,0.9,0.8",
                  "--replicas", "3", "--duration", "1d")
    assert len(rows) == 9
    means = [statistics.fmean(float(r["throughput"]) for r in rows if float(r["value"]) == v)
             for v in (1.0, 0.9, 0.8)]
    assert means[0] == 1.0
    assert means[0] >= means[1] >= means[2]
    # replicas share seeds across values
    by_value = {}
    for r in rows:
        by_value.setdefault(r["value"], []).append(r["seed"])
    assert len({tuple(v) for v in by_value.values()}) == 1
    assert len(set(next(iter(by_value.values())))) == 3


def test_sweep_one_replica_one_row(tmp_path):
    rows = _sweep(tmp_path, "--param", "node.reporting_interval", "--values", "900,1800", "--duration", "6h")
    assert [r["value"] for r in rows] == ["900.0", "1800.0"]
    assert {r["replica"] for r in rows} == {"0"}


def test_sweep_gas_duty_proportional(tmp_path):
    rows = _sweep(tmp_path, "--param", "gas.duty_fraction", "--values", "0.25,0.5,1.0", "--duration", "1d")
    gas = [float(r["gas_j.kitchen"]) for r in rows]
    assert gas[1] / gas[0] == pytest.approx(2.0, rel=0.01)
    assert gas[2] / gas[0] == pytest.approx(4.0, rel=0.01)


def test_sweep_unknown_param(capsys):
    assert main(["sweep", "--param", "link.delivery_prob", "--values", "1"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "link.delivery_probability" in err


def test_sweep_invalid_value(tmp_path):
    code = main(["sweep", "--param", "link.delivery_probability", "--values", "1.5", "--duration", "1h",
                 "--out", str(tmp_path)])
    assert code == EXIT_INVALID


def test_presets_listing(capsys):
    assert main(["presets"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "paper-default" in out and "lossless" in out and "kitchen-forwarder" in out
