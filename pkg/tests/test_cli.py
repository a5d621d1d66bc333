import csv
import json

import pytest

from memtrain.cli import build_parser, main


def test_parser_subcommands():
    p = build_parser()
    a = p.parse_args(["run", "--task", "pattern", "--scheme", "sign_gd", "--device-mode", "perf", "--seed", "3"])
    assert (a.task, a.scheme, a.device_mode, a.seed) == ("pattern", "sign_gd", "perf", 3)
    with pytest.raises(SystemExit):
        p.parse_args(["run", "--scheme", "adam"])


def test_mosaic_report(tmp_path):
    assert main(["mosaic", "report", "--neurons", "64", "--k", "4", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["memory_footprint"] == 16 * 5 * 16 + 33 * 16 * 16 and not rep["favorable"]
    rows = list(csv.reader(open(tmp_path / "energy.csv")))
    assert rows[0] == ["hops", "spikes", "energy_fj"] and rows[-1][0] == "total"


def test_dataset_gen(tmp_path):
    out = tmp_path / "fp.csv"
    assert main(["dataset", "gen", "--n-per-class", "2", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["label"] for r in rows} == {"bursting", "adapting", "tonic", "irregular"}
    assert {r["pattern"] for r in rows} == {str(i) for i in range(8)}


def test_run_pattern_exit_code(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[pattern]\nepochs = 2\nn_rec = 10\n")
    code = main(["run", "--task", "pattern", "--device-mode", "perf", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 1  # two epochs cannot reach the success threshold
    summary = json.loads((tmp_path / "pattern_mixed_precision_perf_seed0.json").read_text())
    assert summary["success"] is False and summary["hyperparams"]["epochs"] == 2
    assert len((tmp_path / "pattern_mixed_precision_perf_seed0.csv").read_text().splitlines()) == 3


def test_run_deterministic_files(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[pattern]\nepochs = 2\nn_rec = 10\n")
    for sub in ("a", "b"):
        main(["run", "--task", "pattern", "--scheme", "stochastic", "--config", str(cfg), "--out", str(tmp_path / sub)])
    name = "pattern_stochastic_pcm_seed0.json"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_rc_small(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[rc]\nn_per_class = 60\nepochs = 2\n[node]\ntau_r = 0.01\n")
    code = main(["run", "--task", "rc", "--training-mode", "float", "--config", str(cfg), "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "rc_float_seed0.json").read_text())
    assert code == (0 if doc["success"] else 1)
    assert len(doc["confusion"]) == 4


def test_run_mnist_missing(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'[mnist]\nroot = "{tmp_path / "nowhere"}"\n')
    from memtrain.tasks.mnist import DatasetMissing
    with pytest.raises(DatasetMissing):
        main(["run", "--task", "mnist", "--config", str(cfg), "--out", str(tmp_path)])


def test_sweep(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[pattern]\nepochs = 2\nn_rec = 8\n")
    code = main(["sweep", "--schemes", "sign_gd", "mixed_precision", "--seeds", "2", "--config", str(cfg),
                 "--out", str(tmp_path)])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 4
    assert set(json.loads((tmp_path / "sweep.json").read_text())["best_of"]) == {"sign_gd_n1", "mixed_precision_n1"}
