"""Rendering checks against the bundled sample exports."""
import json
from pathlib import Path

import pandas as pd
import pytest

from lanefree_plots import PlotSpec, SchemaError, render
from lanefree_plots.cli import main

DATA = Path(__file__).parent / "data"


class TestAllKinds:
    @pytest.mark.parametrize("kind,source", [
        ("speed-traj", "speed_traces.csv"),
        ("lateral-traj", "trajectories.csv"),
        ("interval-bars", "interval_means.csv"),
        ("jerk-hist", "jerk_hist.csv"),
    ])
    def test_renders_without_error(self, tmp_path, kind, source):
        out = tmp_path / f"{kind}.png"
        drawn = render(PlotSpec(DATA / source, kind, out))
        assert out.exists() and out.stat().st_size > 0
        assert drawn

    def test_speed_traj_one_line_per_method(self, tmp_path):
        drawn = render(PlotSpec(DATA / "speed_traces.csv", "speed-traj",
                                tmp_path / "s.png", vehicle_id=1))
        assert set(drawn) == {"max-sum", "no-max-sum", "cond-max-sum",
                              "mobil"}

    def test_lateral_traj_one_line_per_vehicle(self, tmp_path):
        drawn = render(PlotSpec(DATA / "trajectories.csv", "lateral-traj",
                                tmp_path / "l.png"))
        assert set(drawn) == {f"veh-{i}" for i in range(1, 7)}


class TestDataFidelity:
    def test_jerk_hist_matches_metrics_json(self, tmp_path):
        drawn = render(PlotSpec(DATA / "jerk_hist.csv", "jerk-hist",
                                tmp_path / "h.png"))
        metrics = json.loads((DATA / "metrics.json").read_text())
        plotted = drawn["cond-max-sum"]
        expected = metrics["jerk_hist_pct"]
        assert len(plotted) == len(expected)
        for got, want in zip(plotted, expected):
            assert got == pytest.approx(want, abs=0.01)

    def test_every_plotted_number_is_in_the_csv(self, tmp_path):
        df = pd.read_csv(DATA / "interval_means.csv")
        drawn = render(PlotSpec(DATA / "interval_means.csv", "interval-bars",
                                tmp_path / "b.png"))
        source = set(df["v_avg_mps"])
        for series in drawn.values():
            assert all(v in source for v in series)

    def test_speed_values_come_from_source(self, tmp_path):
        df = pd.read_csv(DATA / "speed_traces.csv")
        drawn = render(PlotSpec(DATA / "speed_traces.csv", "speed-traj",
                                tmp_path / "s.png", vehicle_id=2))
        source = set(df[df["vehicle_id"] == 2]["vx_mps"])
        for series in drawn.values():
            assert all(v in source for v in series)


class TestErrors:
    def test_empty_csv_graceful(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        out = tmp_path / "never.png"
        with pytest.raises(SchemaError):
            render(PlotSpec(empty, "jerk-hist", out))
        assert not out.exists()

    def test_missing_columns_listed(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("method,foo\nx,1\n")
        with pytest.raises(SchemaError, match="bin_low"):
            render(PlotSpec(bad, "jerk-hist", tmp_path / "n.png"))

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="figure kind"):
            PlotSpec(DATA / "jerk_hist.csv", "pie", tmp_path / "n.png")

    def test_cli_exit_codes(self, tmp_path, capsys):
        rc = main(["--input", str(DATA / "jerk_hist.csv"), "--kind",
                   "jerk-hist", "--out", str(tmp_path / "h.png")])
        assert rc == 0
        rc = main(["--input", str(tmp_path / "missing.csv"), "--kind",
                   "jerk-hist", "--out", str(tmp_path / "x.png")])
        assert rc == 2
        assert "error" in capsys.readouterr().err
