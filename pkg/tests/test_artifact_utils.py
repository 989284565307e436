import json
import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from segflow.artifact_utils import (
    SERIES_FILE,
    list_outputs,
    probe_frame,
    read_json,
    read_snapshot,
    read_trajectory,
    write_json,
    write_series_csv,
    write_snapshot,
    write_trajectory,
)
from segflow.domain_grid import build_grid
from segflow.errors import MissingArtifactError, UsageError
from segflow.flow_solver import run_flow
from segflow.frequency_analysis import PointClass, caloric_trajectory, probe


def test_snapshot_is_a_header_line_then_x_fastest_doubles(tmp_path):
    grid = build_grid(2, [1.0, 2.0], [3, 4])
    values = np.arange(12, dtype=float).reshape(3, 4)
    path = write_snapshot(tmp_path / "s.bin", grid, values, 0.5, 0, 1, epsilon=0.1)
    raw = path.read_bytes()
    first, payload = raw.split(b"\n", 1)
    header = json.loads(first)
    assert header["counts"] == [3, 4] and header["t"] == 0.5 and header["epsilon"] == 0.1
    stored = np.frombuffer(payload, dtype="<f8")
    assert stored[:3].tolist() == [0.0, 4.0, 8.0]
    _, back = read_snapshot(path)
    assert np.array_equal(back, values)


def test_snapshot_shape_must_match_the_grid(tmp_path, line_grid):
    with pytest.raises(UsageError):
        write_snapshot(tmp_path / "s.bin", line_grid, np.zeros(7), 0.0, 0, 1)
    with pytest.raises(MissingArtifactError):
        read_snapshot(tmp_path / "absent.bin")


def test_trajectory_survives_a_write_and_read(tmp_path, two_phase_data, two_phase_params):
    traj = run_flow(two_phase_data, replace(two_phase_params, t_end=0.01), snapshot_stride=10)
    write_trajectory(tmp_path, traj)
    write_series_csv(tmp_path / SERIES_FILE, traj)
    back = read_trajectory(tmp_path)
    assert back.times == pytest.approx(traj.times)
    assert np.array_equal(back.final.u, traj.final.u)
    assert back.final.step_index == traj.final.step_index
    assert list(back.series.columns) == list(traj.series.columns)
    assert back.series["lambda_1"].to_numpy() == pytest.approx(traj.series["lambda_1"].to_numpy(), rel=1e-15)
    assert {"series", "snapshots"} <= set(list_outputs(tmp_path))


def test_reading_an_empty_directory_fails(tmp_path):
    with pytest.raises(MissingArtifactError):
        read_trajectory(tmp_path)
    with pytest.raises(MissingArtifactError):
        read_json(tmp_path / "report.json")
    assert list_outputs(tmp_path) == []


def test_json_writes_nan_as_null(tmp_path):
    path = write_json(tmp_path / "r.json", {"a": math.nan, "b": np.float64(0.1), "c": np.array([1, 2]), "d": np.bool_(True)})
    data = read_json(path)
    assert data == {"a": None, "b": 0.1, "c": [1, 2], "d": True}


def test_probe_frame_has_radius_and_summary_rows():
    grid = build_grid(1, [6.0], [601])
    traj = caloric_trajectory(grid, "linear", np.linspace(0.0, 0.1, 11))
    result = probe(traj, [3.0], 0.1, [0.3, 0.2, 0.1, 0.05])
    frame = probe_frame([(result, PointClass.REGULAR)])
    assert (frame["row"] == "radius").sum() == 4
    summary = frame[frame["row"] == "summary"].iloc[0]
    assert summary["class"] == PointClass.REGULAR.value
    assert summary["x0"] == 3.0 and math.isnan(summary["y0"])
    assert isinstance(frame, pd.DataFrame)
