import json
import os

import pytest

from kalmanar.cli import main


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


class TestCompareCommand:
    def test_writes_artifacts_and_exits_zero(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "cli", "T": 30, "runs": 2, "depths": [1]})
        out = tmp_path / "out"
        code = main(["compare", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert sorted(os.listdir(out)) == [
            "compare.cli.csv",
            "compare.cli.manifest.json",
            "compare.cli.summary.json",
        ]

    def test_reruns_are_byte_identical(self, tmp_path):
        # identical resolved config (including --out) => identical bytes
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "cli", "T": 25, "runs": 2, "depths": [1], "seed": 4})
        out = tmp_path / "a"
        assert main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
        first = {name: (out / name).read_bytes() for name in os.listdir(out)}
        assert main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
        second = {name: (out / name).read_bytes() for name in os.listdir(out)}
        assert first == second

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "cli", "T": 25, "runs": 2, "depths": [1], "seed": 4})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["compare", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["compare", "--config", str(cfg), "--out", str(out2), "--seed", "99"]) == 0
        with open(out1 / "compare.cli.csv") as f1, open(out2 / "compare.cli.csv") as f2:
            assert f1.read() != f2.read()

    def test_config_error_exits_one(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "cli", "T": 5, "runs": 2, "depths": [9]})
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_unknown_config_key_exits_one(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "cli", "nonsense": True})
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_missing_config_file_exits_one(self, tmp_path):
        assert main(["compare", "--config", str(tmp_path / "nope.json")]) == 1

    def test_numerical_failure_exits_two(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(
            cfg,
            {
                "name": "cli",
                "lds": {"G": 1.0, "F": 1.0, "v": 0.5, "W": 0.0},
                "T": 30,
                "runs": 2,
                "depths": [1],
            },
        )
        assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


class TestIngestCommand:
    def test_reads_series_file_from_path(self, tmp_path):
        series = tmp_path / "series.csv"
        series.write_text("date,close\na,1\nb,3\nc,6\nd,10\n", encoding="utf-8")
        cfg = tmp_path / "cfg.json"
        write_json(
            cfg,
            {"name": "dj", "series": {"path": str(series), "column": "close", "differencing": 1}},
        )
        out = tmp_path / "out"
        assert main(["ingest", "--config", str(cfg), "--out", str(out)]) == 0
        with open(out / "ingest.dj.csv") as fh:
            assert fh.read() == "t,y\n0,2\n1,3\n2,4\n"
        with open(out / "ingest.dj.manifest.json") as fh:
            manifest = json.load(fh)
        assert manifest["extra"]["length"] == 3
        # the inline file content is not echoed back into the manifest
        assert manifest["config"]["series"]["content"] is None

    def test_missing_series_file_exits_one(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "dj", "series": {"path": str(tmp_path / "nope.csv"), "column": 0}})
        assert main(["ingest", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


class TestRunsFlagMapping:
    def test_runs_flag_sets_trajectories_for_noise_sweep(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_json(cfg, {"name": "ns", "w_values": [0.5], "v_values": [0.5], "T": 25})
        out = tmp_path / "out"
        code = main(
            ["noise-sweep", "--config", str(cfg), "--out", str(out), "--runs", "2"]
        )
        assert code == 0
        with open(out / "noise-sweep.ns.manifest.json") as fh:
            assert json.load(fh)["config"]["trajectories"] == 2


def test_output_dir_from_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "from_config"
    write_json(
        cfg,
        {"name": "cli", "T": 25, "runs": 1, "depths": [1], "output_dir": str(out)},
    )
    assert main(["compare", "--config", str(cfg)]) == 0
    assert (out / "compare.cli.csv").exists()
