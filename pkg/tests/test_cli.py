import csv
import json

import pytest
import yaml

from fedwtp.cli import main

SMALL = {
    "data": {"length": 96, "period": 12, "noise_std": 1.0},
    "window": {"r": 3},
    "model": {"hidden_dims": [4]},
    "train": {"batch_size": 16, "local_epochs": 1},
    "fleet": {"num_bs": 10, "adversary_pct": 20},
    "rounds": 3,
}


def write_config(tmp_path, **overrides):
    raw = yaml.safe_load(yaml.safe_dump(SMALL))
    for sec, values in overrides.items():
        if isinstance(values, dict):
            raw.setdefault(sec, {}).update(values)
        else:
            raw[sec] = values
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = write_config(tmp_path, attack={"kind": "fti"}, output={"export_flags": True})
    out = tmp_path / "run"
    assert main(["run", cfg, "--out", str(out)]) == 0
    assert {"rounds.csv", "detection.csv", "config.json", "manifest.json", "fti_trace.csv", "flags.csv"} <= {
        p.name for p in out.iterdir()
    }
    rows = list(csv.DictReader((out / "rounds.csv").open()))
    assert len(rows) == 3
    trace = list(csv.DictReader((out / "fti_trace.csv").open()))
    assert len(trace) == 15 and float(trace[0]["eta"]) == 10.0
    assert "final MAE" in capsys.readouterr().out


def test_print_config(tmp_path, capsys):
    assert main(["run", write_config(tmp_path), "--print-config", "--seed", "5"]) == 0
    printed = yaml.safe_load(capsys.readouterr().out)
    assert printed["fleet"]["num_bs"] == 10 and printed["seeds"] == {"data": 5, "init": 5, "round": 5, "shuffle": 5}


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"fleet": {"adversary_pct": 80}}, "fleet.adversary_pct"),
        ({"data": {"source": "csv", "csv_path": "/nonexistent/grid.csv"}}, "file not found"),
    ],
)
def test_invalid_config_exits_1(tmp_path, capsys, overrides, message):
    assert main(["run", write_config(tmp_path, **overrides), "--out", str(tmp_path / "o")]) == 1
    assert message in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_unreadable_config_exits_1(tmp_path):
    assert main(["run", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n")
    assert main(["run", str(bad)]) == 1


def test_runtime_failure_exits_2(tmp_path):
    cfg = write_config(tmp_path, aggregator={"kind": "krum", "krum_f": 8})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2


def test_matrix_one_cell(tmp_path):
    out = tmp_path / "m"
    assert main(["matrix", write_config(tmp_path), "--aggregators", "median", "--attacks", "fti", "--out", str(out)]) == 0
    rows = list(csv.reader((out / "summary.csv").open()))
    assert rows[0] == ["rule", "metric", "fti"]
    assert [r[:2] for r in rows[1:]] == [["median", "MAE"], ["median", "MSE"]]
    assert (out / "median__fti" / "rounds.csv").exists()
    cell_cfg = json.loads((out / "median__fti" / "config.json").read_text())
    assert cell_cfg["aggregator"]["kind"] == "median" and cell_cfg["attack"]["kind"] == "fti"


def test_matrix_failed_cell_is_err(tmp_path):
    out = tmp_path / "m"
    cfg = write_config(tmp_path, aggregator={"krum_f": 8})
    assert main(["matrix", cfg, "--aggregators", "mean,krum", "--attacks", "none", "--out", str(out)]) == 0
    rows = {tuple(r[:2]): r[2] for r in csv.reader((out / "summary.csv").open())}
    assert rows[("krum", "MAE")] == "ERR"
    assert rows[("mean", "MAE")] != "ERR"


def test_matrix_rejects_unknown_names(tmp_path):
    assert main(["matrix", write_config(tmp_path), "--aggregators", "mode", "--out", str(tmp_path / "m")]) == 1


def test_sweep_csv(tmp_path):
    out = tmp_path / "s"
    args = ["sweep", write_config(tmp_path), "--param", "fake_pct", "--values", "0,20", "--attacks", "fti,none"]
    assert main(args + ["--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "sweep_fake_pct.csv").open()))
    assert [(r["value"], r["attack"]) for r in rows] == [("0", "fti"), ("0", "none"), ("20", "fti"), ("20", "none")]
    # no fakes: identical to the clean run
    assert rows[0]["mae_capped"] == rows[1]["mae_capped"]


def test_sweep_percentile_pair_and_bad_values(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", write_config(tmp_path), "--param", "percentile_pair", "--values", "10:90,0:100", "--out", str(out)]) == 0
    assert len((out / "sweep_percentile_pair.csv").read_text().splitlines()) == 3
    assert main(["sweep", write_config(tmp_path), "--param", "percentile_pair", "--values", "90:10"]) == 1
    assert main(["sweep", write_config(tmp_path), "--param", "eta0", "--values", "abc"]) == 1


def test_matrix_independent_of_workers(tmp_path):
    cfg = write_config(tmp_path)
    common = ["--aggregators", "median,glid", "--attacks", "none,fti"]
    assert main(["matrix", cfg, *common, "--out", str(tmp_path / "w1"), "--workers", "1"]) == 0
    assert main(["matrix", cfg, *common, "--out", str(tmp_path / "w2"), "--workers", "2"]) == 0
    for cell in ("median__none", "median__fti", "glid__none", "glid__fti"):
        assert (tmp_path / "w1" / cell / "rounds.csv").read_bytes() == (tmp_path / "w2" / cell / "rounds.csv").read_bytes()
    assert (tmp_path / "w1" / "summary.csv").read_bytes() == (tmp_path / "w2" / "summary.csv").read_bytes()


def test_one_by_one_matrix_equals_single_run(tmp_path):
    cfg = write_config(tmp_path, attack={"kind": "fti"}, aggregator={"kind": "glid"})
    assert main(["run", cfg, "--out", str(tmp_path / "single")]) == 0
    assert main(["matrix", cfg, "--aggregators", "glid", "--attacks", "fti", "--out", str(tmp_path / "m")]) == 0
    for name in ("rounds.csv", "detection.csv", "fti_trace.csv"):
        assert (tmp_path / "single" / name).read_bytes() == (tmp_path / "m" / "glid__fti" / name).read_bytes()
    single = json.loads((tmp_path / "single" / "config.json").read_text())
    cell = json.loads((tmp_path / "m" / "glid__fti" / "config.json").read_text())
    assert cell["output"].pop("dir") == str(tmp_path / "m" / "glid__fti")
    single["output"].pop("dir")
    assert cell == single
