import csv

import pytest

from activetrack.batch import METRICS_HEADER, SUMMARY_HEADER, run_batch
from activetrack.cli import main
from activetrack.config import (
    DEFAULTS,
    ConfigError,
    ExperimentConfig,
    PolicySpec,
    dump_text,
    parse_text,
)

SMALL = {
    "experiment.num_episodes": 3,
    "experiment.steps": 10,
    "experiment.policies": ["random", "patrol"],
    "filter.num_particles": 100,
}


def small_cfg(**extra):
    return ExperimentConfig.desk(**{**SMALL, **extra})


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_policy_spec_parse():
    assert PolicySpec.parse("mcts:5") == PolicySpec("mcts", 5)
    assert str(PolicySpec.parse("patrol")) == "patrol"
    for bad in ("mcts", "mcts:x", "greedy", "mcts:-1"):
        with pytest.raises(ConfigError):
            PolicySpec.parse(bad)


def test_config_text_round_trip():
    text = dump_text(DEFAULTS)
    assert parse_text(text) == DEFAULTS
    assert parse_text("# comment\n\nplanner.gamma = 0.5\n") == {"planner.gamma": 0.5}
    with pytest.raises(ConfigError):
        parse_text("planner.gamma 0.5")


@pytest.mark.parametrize("key, value", [
    ("planner.gamma", 1.5), ("room.width", 0), ("filter.num_particles", 0),
    ("observation.resolution", 7), ("experiment.policies", []), ("planner.budget", 2.5),
])
def test_config_validation_names_field(key, value):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        ExperimentConfig.from_mapping({key: value})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_mapping({"planner.depth": 3})


def test_desk_profile_values():
    cfg = ExperimentConfig.desk()
    assert cfg["filter.num_particles"] == 300
    assert cfg["planner.plan_particles"] == 150
    assert cfg["planner.budget"] == 300
    assert cfg["experiment.num_episodes"] == 50
    assert cfg["experiment.steps"] == 30
    assert cfg.planner_config(5).horizon == 5


def test_batch_counts_and_means(tmp_path):
    res = run_batch(small_cfg(), tmp_path)
    metrics = read_rows(res.metrics_path)
    summary = read_rows(res.summary_path)
    assert ",".join(metrics[0]) == METRICS_HEADER
    assert ",".join(summary[0]) == SUMMARY_HEADER
    assert len(metrics) - 1 == 2 * 3 * 10
    assert len(summary) - 1 == 2 * 10
    for row in summary[1:]:
        pol, k, t = row[0], row[1], row[2]
        vals = [float(m[4]) for m in metrics[1:] if m[0] == pol and m[1] == k and m[3] == t]
        assert int(row[3]) == len(vals) == 3
        assert float(row[4]) == pytest.approx(sum(vals) / 3, rel=1e-8)


def test_batch_is_byte_identical_across_runs_and_threads(tmp_path):
    cfg = small_cfg(**{"experiment.policies": ["random", "mcts:2"], "experiment.num_episodes": 2,
                       "experiment.steps": 5, "planner.budget": 20,
                       "planner.plan_particles": 30})
    a = run_batch(cfg, tmp_path / "a")
    b = run_batch(cfg, tmp_path / "b", threads=2)
    for name in ("metrics_path", "summary_path"):
        assert getattr(a, name).read_bytes() == getattr(b, name).read_bytes()


def test_cli_gen_table_then_batch(tmp_path, capsys):
    table = tmp_path / "table.csv"
    assert main(["gen-table", "--out", str(table)]) == 0
    conf = tmp_path / "exp.conf"
    conf.write_text(dump_text({**SMALL, "experiment.steps": 4, "experiment.num_episodes": 1}))
    out = tmp_path / "res"
    assert main(["batch", "--config", str(conf), "--table", str(table), "--out", str(out)]) == 0
    assert (out / "metrics.csv").exists() and (out / "summary.csv").exists()


def test_cli_simulate_logs_steps(tmp_path, capsys):
    conf = tmp_path / "exp.conf"
    conf.write_text(dump_text({"experiment.steps": 4, "filter.num_particles": 50}))
    assert main(["simulate", "--config", str(conf), "--policy", "patrol", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert sum(line.startswith("t=") for line in out.splitlines()) == 3
    assert "mean error" in out


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["batch", "--config", str(tmp_path / "missing.conf")]) == 2
    bad = tmp_path / "bad.conf"
    bad.write_text("planner.gamma = 1.5\n")
    assert main(["batch", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "planner.gamma" in capsys.readouterr().err
