import csv

import pytest

from sparqlab.cli import main

TINY_CONFIG = """
[run]
total_timesteps = 400
eval_every = 200
eval_episodes = 5

[gate]
budget = 30

[learner]
batch_size = 32
warmup_steps = 50
update_every = 4
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_CONFIG)
    return path


def test_train_writes_run_files(tmp_path, config_file, capsys, monkeypatch):
    monkeypatch.delenv("SPARQ_LOG_DIR", raising=False)
    out = tmp_path / "logs"
    code = main(["train", "--config", str(config_file), "--method", "always",
                 "--seed", "5", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "method=always seed=5" in printed
    events = list(out.glob("run_*_always_5.events.csv"))
    assert len(events) == 1
    with open(events[0], newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 400
    assert sum(int(r["query"]) for r in rows) == 30


def test_compare_then_report_reproduces_table(tmp_path, config_file, capsys, monkeypatch):
    monkeypatch.delenv("SPARQ_LOG_DIR", raising=False)
    out = tmp_path / "logs"
    code = main(["compare", "--config", str(config_file), "--seeds", "0,1",
                 "--methods", "no_oracle,always", "--out", str(out), "--workers", "1"])
    assert code == 0
    tables = list(out.glob("table_*.csv"))
    assert len(tables) == 1
    original = tables[0].read_bytes()

    code = main(["report", "--logs", str(out)])
    assert code == 0
    recomputed = list(out.glob("table_*.recomputed.csv"))
    assert len(recomputed) == 1
    assert recomputed[0].read_bytes() == original


def test_report_with_no_logs_fails_cleanly(tmp_path, capsys):
    code = main(["report", "--logs", str(tmp_path)])
    assert code == 2


def test_compare_requires_seeds(tmp_path, config_file):
    code = main(["compare", "--config", str(config_file), "--seeds", "",
                 "--out", str(tmp_path)])
    assert code == 2


def test_train_with_oracle_bridge_flag(tmp_path, config_file, capsys, monkeypatch):
    monkeypatch.delenv("SPARQ_LOG_DIR", raising=False)
    code = main(["train", "--config", str(config_file), "--method", "no_oracle",
                 "--out", str(tmp_path / "logs"), "--serve-oracle", "--port", "0"])
    assert code == 0
    assert "oracle bridge listening" in capsys.readouterr().out
