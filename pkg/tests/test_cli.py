"""Command-line interface contracts: files, exit codes, determinism."""
import json

import pytest

from lanefree.cli import main
from lanefree.sim import (coordination_scenario, read_trajectories,
                          save_config)


@pytest.fixture()
def coord_cfg(tmp_path):
    path = tmp_path / "coordination.cfg"
    save_config(coordination_scenario(seed=1), path)
    return path


class TestRun:
    def test_writes_outputs(self, coord_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        rc = main(["run", "--config", str(coord_cfg), "--variant",
                   "cond-max-sum", "--out", str(out)])
        assert rc == 0
        assert (out / "trajectories.csv").exists()
        assert (out / "metrics.json").exists()
        report = json.loads((out / "metrics.json").read_text())
        assert report["collisions"] == 0
        assert "v_avg" in capsys.readouterr().out

    def test_seed_determinism_byte_identical(self, coord_cfg, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(["run", "--config", str(coord_cfg), "--seed", "7",
                       "--out", str(out)])
            assert rc == 0
            outs.append((out / "trajectories.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_missing_config_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.cfg"
        rc = main(["run", "--config", str(missing), "--out",
                   str(tmp_path / "o")])
        assert rc == 2
        assert str(missing) in capsys.readouterr().err

    def test_duration_override(self, coord_cfg, tmp_path):
        out = tmp_path / "out"
        rc = main(["run", "--config", str(coord_cfg), "--duration", "2.0",
                   "--out", str(out)])
        assert rc == 0
        rows = read_trajectories(out / "trajectories.csv")
        assert max(r[0] for r in rows) == 9  # 2 s at dt = 0.2


class TestCompare:
    def test_four_method_table_and_json(self, coord_cfg, tmp_path, capsys):
        out = tmp_path / "cmp"
        rc = main(["compare", "--config", str(coord_cfg), "--seeds", "1..2",
                   "--out", str(out)])
        assert rc == 0
        combined = json.loads((out / "comparison.json").read_text())
        assert set(combined["summary"]) == {"max-sum", "no-max-sum",
                                            "cond-max-sum", "mobil"}
        assert combined["seeds"] == [1, 2]
        for method in combined["summary"]:
            assert (out / method / "trajectories.csv").exists()
        assert (out / "interval_means.csv").exists()
        assert (out / "jerk_hist.csv").exists()
        text = capsys.readouterr().out
        assert "cond-max-sum" in text and "mobil" in text

    def test_seed_list_parsing(self, coord_cfg, tmp_path):
        out = tmp_path / "cmp2"
        rc = main(["compare", "--config", str(coord_cfg), "--seeds", "3,5",
                   "--out", str(out)])
        assert rc == 0
        combined = json.loads((out / "comparison.json").read_text())
        assert combined["seeds"] == [3, 5]


class TestMetricsCommand:
    def test_recompute_matches_run(self, coord_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(coord_cfg), "--out", str(out)])
        out2 = tmp_path / "re"
        rc = main(["metrics", "--trajectories",
                   str(out / "trajectories.csv"), "--out", str(out2)])
        assert rc == 0
        orig = json.loads((out / "metrics.json").read_text())
        redo = json.loads((out2 / "metrics.json").read_text())
        for key in ("v_avg", "v_dev_avg", "jerk_y_avg", "tts_h"):
            assert redo[key] == pytest.approx(orig[key], abs=1e-9)

    def test_missing_trajectories_exits_2(self, tmp_path):
        rc = main(["metrics", "--trajectories",
                   str(tmp_path / "missing.csv"), "--out", str(tmp_path)])
        assert rc == 2


class TestViolationGate:
    def test_collisions_fail_without_flag(self, tmp_path, capsys):
        # two vehicles spawned overlapping: collisions from step one
        cfg = coordination_scenario(seed=1)
        cfg.fleet[1] = type(cfg.fleet[1])(
            id=2, x=0.0, y=3.5, v_x=25.0, v_d=31.0, offset_s=-2.0)
        cfg.duration_s = 2.0
        path = tmp_path / "bad.cfg"
        save_config(cfg, path)
        out = tmp_path / "out"
        rc = main(["run", "--config", str(path), "--out", str(out)])
        assert rc == 1
        assert "violations" in capsys.readouterr().err
        rc = main(["run", "--config", str(path), "--out", str(out),
                   "--allow-violations"])
        assert rc == 0
