import csv
import json
import subprocess
import sys

from relay_ddpg.cli import main


def write_config(cfg, path):
    path.write_text(cfg.to_json())
    return str(path)


def test_train_writes_outputs(tiny_config, tmp_path, capsys):
    cfg = write_config(tiny_config, tmp_path / "c.json")
    assert main(["train", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "t")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "t" / "metrics.csv")))
    assert len(rows) == tiny_config.episodes
    assert (tmp_path / "t" / "per_ddpg_seed3.ckpt.json").exists()
    assert "per_ddpg seed=3" in capsys.readouterr().out


def test_trials_then_eval(tiny_config, tmp_path, capsys):
    cfg = write_config(tiny_config, tmp_path / "c.json")
    for agent in ("dqn", "random"):
        assert main(["trials", "--config", cfg, "--agent", agent, "--trials", "2",
                     "--out", str(tmp_path / agent)]) == 0
    summary = list(csv.DictReader(open(tmp_path / "dqn" / "summary.csv")))
    assert [r["seed"] for r in summary] == ["0", "1"]
    out_csv = tmp_path / "eval.csv"
    assert main(["eval", "--checkpoints", str(tmp_path / "*" / "*.ckpt.json"),
                 "--thresholds", "0.05,0.5", "--episodes", "2", "--out", str(out_csv)]) == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert {r["method"] for r in rows} == {"dqn", "random"}
    assert len(rows) == 4
    assert "random" in capsys.readouterr().out


def test_eval_with_no_readable_checkpoint(tmp_path, capsys):
    assert main(["eval", "--checkpoints", str(tmp_path / "none.json"), "--out",
                 str(tmp_path / "e.csv")]) == 1
    assert "skipped" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"bogus": 1}))
    assert main(["train", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_selftest_subcommand():
    proc = subprocess.run([sys.executable, "-m", "relay_ddpg", "selftest"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 3
