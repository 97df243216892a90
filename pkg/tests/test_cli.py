"""Command-line interface: run, table1, and sweep subcommands."""

import json

import pytest

from fedsim.cli import main
from fedsim.fedreview import dominance_probability

SMALL_CONFIG = """\
num_clients = 12
rounds = 3
clients_per_round = 3
reviewers_per_round = 3
malicious_fraction = 0.25
defense = fedreview
attack.kind = scaling
attack.lambda = 5.0
model.layer_sizes = 5,8,3
sgd.local_epochs = 2
sgd.batch_size = 16
partition.scheme = iid
data.num_classes = 3
data.samples_per_class = 30
data.dims = 5
data.class_separation = 4.0
data.test_samples_per_class = 10
master_seed = 3
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(SMALL_CONFIG)
    return str(path)


@pytest.fixture(autouse=True)
def serial_sweeps(monkeypatch):
    monkeypatch.setenv("FEDSIM_THREADS", "1")


class TestRun:
    def test_writes_csv_and_summary(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", config_path, "--out", str(out)]) == 0

        csv_lines = (out / "rounds.csv").read_text().strip().splitlines()
        assert csv_lines[0] == (
            "round,test_loss,test_accuracy,n_removed,n_adv_estimate,"
            "precision_flag,gamma_succ,dynamic_lambda"
        )
        assert len(csv_lines) == 1 + 3
        first = csv_lines[1].split(",")
        assert first[0] == "0"
        # scaling attack leaves the search diagnostics empty
        assert first[6] == "" and first[7] == ""

        summary = json.loads((out / "summary.json").read_text())
        assert set(summary) == {
            "final_accuracy",
            "precision",
            "recall",
            "csv_path",
            "config_hash",
            "wall_seconds",
        }
        assert len(summary["config_hash"]) == 64

        stdout = capsys.readouterr().out
        assert "final_accuracy=" in stdout
        assert "precision=" in stdout and "recall=" in stdout
        assert "rounds_csv=" in stdout

    def test_reruns_are_byte_identical(self, config_path, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", config_path, "--out", str(out_a)]) == 0
        assert main(["run", "--config", config_path, "--out", str(out_b)]) == 0
        assert (out_a / "rounds.csv").read_bytes() == (out_b / "rounds.csv").read_bytes()
        sa = json.loads((out_a / "summary.json").read_text())
        sb = json.loads((out_b / "summary.json").read_text())
        sa.pop("wall_seconds"), sb.pop("wall_seconds")
        sa.pop("csv_path"), sb.pop("csv_path")
        assert sa == sb

    def test_seed_override_changes_results(self, config_path, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", config_path, "--out", str(out_a)])
        main(
            [
                "run", "--config", config_path, "--out", str(out_b),
                "--seed-override", "99",
            ]
        )
        sa = json.loads((out_a / "summary.json").read_text())
        sb = json.loads((out_b / "summary.json").read_text())
        assert sa["config_hash"] != sb["config_hash"]

    def test_bad_config_exits_two(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("round_count = 5\n")
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_exits_two(self, tmp_path):
        code = main(
            ["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]
        )
        assert code == 2

    def test_runtime_failure_exits_one(self, tmp_path, capsys):
        # parses and builds, but the dataset is too small to shard at runtime
        path = tmp_path / "thin.cfg"
        path.write_text(
            "num_clients = 60\nclients_per_round = 2\nreviewers_per_round = 0\n"
            "model.layer_sizes = 5,3\ndata.num_classes = 3\n"
            "data.samples_per_class = 10\ndata.dims = 5\n"
            "data.test_samples_per_class = 5\n"
        )
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestTable1:
    def test_prints_probability_grid(self, capsys):
        assert main(["table1"]) == 0
        out = capsys.readouterr().out
        lines = [l for l in out.strip().splitlines() if l and l[0].isdigit()]
        assert len(lines) == 2
        for line, n in zip(lines, (10, 20)):
            cells = [c for c in line.split() if c.endswith("%")]
            assert len(cells) == 3
            for cell, p in zip(cells, (0.2, 0.3, 0.4)):
                want = dominance_probability(n, p) * 100.0
                assert abs(float(cell.rstrip("%")) - want) < 0.005


class TestSweep:
    def test_one_subdir_per_value_plus_combined_csv(self, config_path, tmp_path):
        out = tmp_path / "sweep"
        code = main(
            [
                "sweep", "--config", config_path, "--out", str(out),
                "--param", "review.k", "--values", "1.0,2.0",
            ]
        )
        assert code == 0
        for value in ("1.0", "2.0"):
            sub = out / f"review.k={value}"
            assert (sub / "rounds.csv").exists()
            assert (sub / "summary.json").exists()
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == (
            "param,value,final_accuracy,precision,recall,config_hash,csv_path"
        )
        assert len(lines) == 3
        assert lines[1].startswith("review.k,1.0,")
        assert lines[2].startswith("review.k,2.0,")

    def test_swept_key_actually_varies(self, config_path, tmp_path):
        out = tmp_path / "sweep"
        main(
            [
                "sweep", "--config", config_path, "--out", str(out),
                "--param", "master_seed", "--values", "1,2",
            ]
        )
        hashes = set()
        for value in ("1", "2"):
            summary = json.loads(
                (out / f"master_seed={value}" / "summary.json").read_text()
            )
            hashes.add(summary["config_hash"])
        assert len(hashes) == 2

    def test_empty_values_exits_two(self, config_path, tmp_path, capsys):
        code = main(
            [
                "sweep", "--config", config_path, "--out", str(tmp_path / "s"),
                "--param", "review.k", "--values", " , ",
            ]
        )
        assert code == 2
        assert "nonempty" in capsys.readouterr().err

    def test_unknown_param_exits_two(self, config_path, tmp_path):
        code = main(
            [
                "sweep", "--config", config_path, "--out", str(tmp_path / "s"),
                "--param", "review.q", "--values", "1.0",
            ]
        )
        assert code == 2

    def test_bad_thread_cap_exits_two(self, config_path, tmp_path, monkeypatch):
        for bad in ("0", "lots"):
            monkeypatch.setenv("FEDSIM_THREADS", bad)
            code = main(
                [
                    "sweep", "--config", config_path, "--out", str(tmp_path / bad),
                    "--param", "review.k", "--values", "1.0",
                ]
            )
            assert code == 2
