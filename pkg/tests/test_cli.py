"""Experiment configs, result files and the command line verbs."""
import csv
import json
import os

import numpy as np
import pytest
import yaml

from sccoding import cli
from sccoding.experiments import (ExperimentConfig, LinkSimulator, ResultWriter, ber_crossing, capacity_snr,
                                  inspect, run_threshold, worker_count)

SMALL = {
    "code": {"family": "scldpc", "blocks": [[[2, 2]], [[1, 1]]]},
    "order_per_dim": 2,
    "W": 4,
    "l_max": 5,
    "T": [8],
    "bracket": [-1.0, 5.0],
    "tol_db": 0.02,
}


def test_config_overrides_and_validation():
    cfg = ExperimentConfig.from_dict(SMALL, ["code.nu=10", "T=[12, 30]", "optimizer.generations=3"])
    assert cfg["code"]["nu"] == 10 and cfg["T"] == [12, 30] and cfg["optimizer"]["generations"] == 3
    assert cfg["W"] == 4
    for bad in ({"colour": 1}, {"job": "plot"}, {"modes": ["open"]}, {"order_per_dim": 3},
                {"target_ber": 0.7}, {"code": {"family": "turbo"}}):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(bad)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({}, ["novalue"])


def test_config_hash_is_stable():
    a = ExperimentConfig.from_dict(SMALL)
    b = ExperimentConfig.from_dict(dict(reversed(list(SMALL.items()))))
    assert a.hash == b.hash
    assert a.hash != ExperimentConfig.from_dict(SMALL, ["seed=1"]).hash


def test_worker_count(monkeypatch):
    monkeypatch.setenv("SCCODING_WORKERS", "3")
    assert worker_count() == 3


def test_inspect_reports_rates():
    cfg = ExperimentConfig.from_dict(SMALL, ["T=[20]"])
    info = inspect(cfg)
    rates = {e["mode"]: e["design_rate"] for e in info["entries"]}
    assert rates["terminated"] == pytest.approx(0.475)
    assert rates["tailbiting"] == pytest.approx(0.5)
    g = inspect(ExperimentConfig.from_dict({"code": {"family": "scgldpc", "nu": 7, "t": 3, "s": 43}, "T": [5]}))
    assert g["entries"][0]["component"] == [84, 63]
    assert g["entries"][0]["design_rate"] == pytest.approx(0.4)


def test_threshold_runner_is_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    out = []
    for k in range(2):
        w = ResultWriter(str(tmp_path / f"r{k}"))
        run_threshold(cfg, w)
        out.append([(r.metric, r.x, r.y) for r in w.records])
    assert out[0] == out[1]
    assert out[0][0][2] < out[0][1][2]


def test_capacity_snr_round_trip():
    cfg = ExperimentConfig.from_dict(SMALL)
    s = capacity_snr(cfg, 0.5)
    # QPSK at rate 1/2 per coded bit: BPSK capacity 1/2 at about 0.19 dB (Es/N0 per real dimension pair)
    assert -0.5 < s < 0.5
    g = ExperimentConfig.from_dict({**SMALL, "code": {"family": "scgldpc"}})
    assert capacity_snr(g, 0.5) > s


def test_ber_crossing():
    assert ber_crossing([1, 2, 3], [1e-2, 1e-4, 1e-6], 1e-3) == pytest.approx(1.5)
    assert np.isnan(ber_crossing([1, 2], [1e-2, 1e-3], 1e-5))


def test_link_simulator_small_frames():
    cfg = ExperimentConfig.from_dict(SMALL, ["simulation.lifting=40"])
    sim = LinkSimulator(cfg, 8, "tailbiting")
    rng = np.random.default_rng(0)
    assert sim.frame(8.0, rng) == 0
    assert sim.frame(-4.0, rng) > 0
    g = ExperimentConfig.from_dict({"code": {"family": "scgldpc", "nu": 7, "t": 3, "s": 43, "C": 20},
                                    "order_per_dim": 4, "l_max": 5, "W": 3})
    gs = LinkSimulator(g, 6, "terminated")
    assert gs.frame(20.0, rng) == 0


def _run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_cli_inspect(capsys):
    code, out, _ = _run(["inspect", "--set", "T=[5]", "--set", "code.blocks=[[[1,1]],[[1,1]],[[1,1]]]"], capsys)
    assert code == 0
    rates = [e["design_rate"] for e in json.loads(out)["entries"]]
    assert rates == pytest.approx([0.3, 0.5])


def test_cli_threshold_writes_outputs(tmp_path, capsys):
    conf = tmp_path / "exp.yaml"
    conf.write_text(yaml.safe_dump(SMALL))
    out_dir = tmp_path / "out"
    code, out, _ = _run(["threshold", "--config", str(conf), "--output", str(out_dir)], capsys)
    assert code == 0
    recs = [json.loads(line) for line in (out_dir / "records.jsonl").read_text().splitlines()]
    assert {r["metric"] for r in recs} == {"threshold_terminated", "threshold_tailbiting"}
    assert all(r["status"] == "ok" for r in recs)
    assert os.path.exists(out_dir / "config.resolved.yaml")
    with open(out_dir / "threshold_terminated.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["x"]) == 8


def test_cli_error_record(tmp_path, capsys):
    code, _, err = _run(["threshold", "--set", "order_per_dim=3", "--output", str(tmp_path)], capsys)
    assert code != 0
    rec = json.loads(err)
    assert rec["status"] == "error" and rec["verb"] == "threshold"


def test_cli_simulate_upper_bound(tmp_path, capsys):
    args = ["simulate", "--output", str(tmp_path)]
    for kv in ("code.blocks=[[[2,2]],[[1,1]]]", "order_per_dim=2", "T=[6]", "modes=[tailbiting]", "W=3",
               "l_max=5", "simulation.lifting=20", "simulation.snr_db=[9.0]", "simulation.max_frames=2"):
        args += ["--set", kv]
    code, out, _ = _run(args, capsys)
    assert code == 0
    rec = json.loads(out.splitlines()[0])
    assert rec["status"] == "upper-bound" and rec["y"] == pytest.approx(3 / (2 * 240))
