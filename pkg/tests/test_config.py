import pytest
import yaml

from fedwtp.config import ConfigError, ExperimentConfig, dump_config, load_config, resolve


def test_defaults():
    cfg = resolve()
    assert cfg == ExperimentConfig()
    assert cfg.fleet.num_bs == 100 and cfg.fleet.adversary_pct == 20
    assert cfg.rounds == 50
    assert cfg.num_adversaries == 20
    assert cfg.omega == cfg.data.period
    assert cfg.aggregator.kind == "glid" and cfg.aggregator.k == 3


def test_all_problems_reported_together():
    with pytest.raises(ConfigError) as err:
        resolve({"fleet": {"adversary_pct": 80}, "aggregator": {"kind": "bogus"}, "train": {"batch_size": 0}})
    where = {p.split(":")[0] for p in err.value.problems}
    assert where == {"fleet.adversary_pct", "aggregator.kind", "train.batch_size"}


def test_unknown_fields_and_sections():
    with pytest.raises(ConfigError) as err:
        resolve({"fleet": {"size": 10}, "extras": {}})
    assert "fleet.size: unknown field" in err.value.problems
    assert "extras: unknown section" in err.value.problems


def test_missing_csv_rejected(tmp_path):
    raw = {"data": {"source": "csv", "csv_path": str(tmp_path / "nope.csv")}}
    with pytest.raises(ConfigError, match="file not found"):
        resolve(raw)
    assert resolve(raw, check_paths=False).data.csv_path.endswith("nope.csv")


@pytest.mark.parametrize(
    "raw",
    [
        {"fleet": {"adversary_pct": -1}},
        {"fleet": {"num_bs": 1}},
        {"window": {"r": 30}},  # omega defaults to period 24
        {"data": {"split": 1.0}},
        {"attack": {"eta0": -1}},
        {"attack": {"base_model": "ones"}},
        {"aggregator": {"fixed_pair": [60, 40]}},
        {"aggregator": {"estimator": "mad"}},
        {"rounds": -1},
        {"seeds": {"data": 1.5}},
        {"train": {"learning_rate": True}},
    ],
)
def test_invalid_values(raw):
    with pytest.raises(ConfigError):
        resolve(raw)


def test_yaml_round_trip(tmp_path):
    cfg = resolve({"attack": {"kind": "fti", "eta0": 4.0}, "aggregator": {"fixed_pair": [5.0, 95.0]}, "seeds": {"round": 7}})
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    assert yaml.safe_load(dump_config(cfg))["attack"]["eta0"] == 4.0


def test_replace_and_aggregator_config():
    cfg = resolve().replace(aggregator__kind="median", fleet__adversary_pct=10, rounds=3)
    assert cfg.aggregator.kind == "median" and cfg.num_adversaries == 10 and cfg.rounds == 3
    agg = resolve({"aggregator": {"fixed_pair": [1, 99]}}).aggregator_config()
    assert agg.glid.fixed_pair == (1, 99)


def test_csv_omega_is_one_day():
    cfg = resolve({"data": {"source": "csv", "csv_path": "x.csv", "interval_minutes": 60}}, check_paths=False)
    assert cfg.omega == 24
