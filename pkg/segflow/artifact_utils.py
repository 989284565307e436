"""Run artifacts: series CSV, binary field snapshots, JSON reports, probe tables.

Floats in CSV files are written with 17 significant digits; JSON uses Python's
shortest round-trip repr. Identical inputs give byte-identical files.
"""

import json
import logging
import math
import os
from pathlib import Path

import numpy as np
import pandas as pd

from .domain_grid import build_grid
from .errors import MissingArtifactError, UsageError
from .flow_solver import FlowState, Trajectory

logger = logging.getLogger(__name__)

SNAPSHOT_SCHEMA = 1
FLOAT_FORMAT = "%.17g"
SERIES_FILE = "series.csv"
STAGES_FILE = "stages.csv"
RESOLVED_CONFIG_FILE = "resolved_config.toml"
SNAPSHOT_DIR = "snapshots"
SNAPSHOT_INDEX = "index.csv"


def ensure_dir(path):
    Path(path).mkdir(parents=True, exist_ok=True)
    return Path(path)


def write_csv(path, frame):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return Path(path)


def write_series_csv(path, traj):
    return write_csv(path, traj.series)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path, data):
    text = json.dumps(_jsonable(data), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
    return Path(path)


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing artifact {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def write_snapshot(path, grid, values, t, component, m, epsilon=None, step=None, stage=None, lam=None):
    """One component field: a JSON header line, then float64 little-endian values, x fastest."""
    values = np.asarray(values, dtype=float)
    if values.shape != tuple(grid.counts):
        raise UsageError(f"snapshot shape {values.shape} does not match grid counts {grid.counts}")
    header = {
        "schema": SNAPSHOT_SCHEMA,
        "dim": grid.dim,
        "counts": list(grid.counts),
        "extents": list(grid.extents),
        "geometry": grid.geometry,
        "m": m,
        "t": float(t),
        "component": component,
        "epsilon": epsilon,
        "step": step,
        "stage": stage,
        "lam": lam,
    }
    payload = values.ravel(order="F").astype("<f8").tobytes()
    with open(path, "wb") as handle:
        handle.write(json.dumps(_jsonable(header), sort_keys=True).encode("utf-8") + b"\n")
        handle.write(payload)
    return Path(path)


def read_snapshot_header(path):
    with open(path, "rb") as handle:
        return json.loads(handle.readline().decode("utf-8"))


def read_snapshot(path):
    """Return (header, values) with values shaped by the header's counts."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing snapshot {path}")
    with open(path, "rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        payload = handle.read()
    counts = tuple(header["counts"])
    values = np.frombuffer(payload, dtype="<f8")
    if values.size != int(np.prod(counts)):
        raise MissingArtifactError(f"snapshot {path} holds {values.size} values, expected {int(np.prod(counts))}")
    return header, values.reshape(counts, order="F").astype(float)


def snapshot_name(k, j):
    return f"snap_{k:06d}_c{j + 1}.bin"


def write_trajectory(out_dir, traj):
    """Write every snapshot of a trajectory plus an index table."""
    snap_dir = ensure_dir(Path(out_dir) / SNAPSHOT_DIR)
    rows = []
    for k, state in enumerate(traj.snapshots):
        for j in range(state.m):
            write_snapshot(
                snap_dir / snapshot_name(k, j),
                traj.grid,
                state.u[j],
                state.t,
                j,
                state.m,
                epsilon=state.epsilon,
                step=state.step_index,
                stage=state.stage,
                lam=list(state.lam),
            )
        rows.append({"k": k, "t": state.t, "step": state.step_index, "stage": state.stage, "epsilon": state.epsilon})
    write_csv(snap_dir / SNAPSHOT_INDEX, pd.DataFrame(rows, columns=["k", "t", "step", "stage", "epsilon"]))
    logger.info("wrote %d snapshots to %s", len(rows), snap_dir)
    return snap_dir


def read_trajectory(out_dir):
    """Rebuild a Trajectory (snapshots and series) from a run directory."""
    out_dir = Path(out_dir)
    snap_dir = out_dir / SNAPSHOT_DIR
    index_path = snap_dir / SNAPSHOT_INDEX
    if not index_path.exists():
        raise MissingArtifactError(f"no snapshots under {out_dir} (expected {index_path})")
    index = pd.read_csv(index_path)
    if index.empty:
        raise MissingArtifactError(f"snapshot index {index_path} is empty")

    header = read_snapshot_header(snap_dir / snapshot_name(0, 0))
    grid = build_grid(header["dim"], header["extents"], header["counts"], header.get("geometry", "box"))
    m = header["m"]
    snapshots = []
    for row in index.itertuples(index=False):
        fields = []
        for j in range(m):
            h, values = read_snapshot(snap_dir / snapshot_name(int(row.k), j))
            fields.append(values)
        lam = tuple(h.get("lam") or [0.0] * m)
        snapshots.append(
            FlowState(
                grid=grid,
                u=np.stack(fields),
                t=float(h["t"]),
                lam=lam,
                dirichlet_energy=0.0,
                penalty_energy=0.0,
                epsilon=h.get("epsilon") if h.get("epsilon") is not None else 1.0,
                step_index=int(h.get("step") or 0),
                stage=int(h.get("stage") or 0),
            )
        )

    series_path = out_dir / SERIES_FILE
    records, columns = [], []
    if series_path.exists():
        series = pd.read_csv(series_path)
        columns = list(series.columns)
        records = [list(r) for r in series.itertuples(index=False)]
    traj = Trajectory(grid, snapshots, records=records, columns=columns)
    stages_path = out_dir / STAGES_FILE
    if stages_path.exists():
        traj.stages = pd.read_csv(stages_path).to_dict("records")
    return traj


def probe_frame(results):
    """Probe table: one row per (probe, R) and a summary row per probe.

    `results` is a list of (FrequencyProbe, PointClass or None) pairs.
    """
    rows = []
    for index, (result, point_class) in enumerate(results):
        x0, t0 = result.base
        base = {"probe": index, "x0": x0[0], "y0": x0[1] if len(x0) > 1 else math.nan, "t0": t0}
        for R, I, H, N in zip(result.radii, result.I_vals, result.H_vals, result.N_vals):
            rows.append({**base, "row": "radius", "R": R, "I": I, "H": H, "N": N})
        rows.append(
            {
                **base,
                "row": "summary",
                "fitted_C": result.fitted_C,
                "alpha_hat": result.alpha_hat,
                "growth_alpha": result.growth_alpha,
                "R0": result.R0,
                "pair": "-".join(str(j + 1) for j in result.interface_pair) if result.interface_pair else "",
                "class": point_class.value if point_class is not None else "",
            }
        )
    columns = ["probe", "row", "x0", "y0", "t0", "R", "I", "H", "N", "fitted_C", "alpha_hat", "growth_alpha", "R0", "pair", "class"]
    return pd.DataFrame(rows, columns=columns)


def write_fields(out_dir, grid, fields, prefix, t=0.0):
    """Write a list of ScalarFields (e.g. eigenfunctions) as snapshot files."""
    out_dir = ensure_dir(out_dir)
    paths = []
    for j, f in enumerate(fields):
        paths.append(write_snapshot(out_dir / f"{prefix}_c{j + 1}.bin", grid, f.values, t, j, len(fields)))
    return paths


def run_paths(out_dir):
    out_dir = Path(out_dir)
    return {
        "series": out_dir / SERIES_FILE,
        "stages": out_dir / STAGES_FILE,
        "resolved_config": out_dir / RESOLVED_CONFIG_FILE,
        "snapshots": out_dir / SNAPSHOT_DIR,
        "probes": out_dir / "probes.csv",
        "lipschitz": out_dir / "lipschitz.csv",
        "report": out_dir / "convergence_report.json",
        "partition": out_dir / "partition.json",
        "interface": out_dir / "interface.csv",
        "eigenfunctions": out_dir / "eigenfunctions",
        "oracle": out_dir / "oracle.json",
    }


def list_outputs(out_dir):
    """Names of the artifacts present in a run directory."""
    return sorted(name for name, path in run_paths(out_dir).items() if os.path.exists(path))
