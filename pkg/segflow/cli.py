"""Command-line entry point: run | freq | partition | oracle.

Exit codes: 0 success, 1 numerical/domain failure, 2 configuration or usage error,
3 missing trajectory artifacts, 4 no multiplier plateau by the end of the run.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import artifact_utils as artifacts
from .asymptotics_partition import detect_plateau, extract_limit
from .config_utils import CALORIC_PRESETS, dump_config, initial_data, load_config, resolve_dt
from .debug_utils import configure_logging
from .domain_grid import build_grid
from .errors import ConfigurationError, MissingArtifactError, NoPlateauError, RangeError, SegflowError
from .flow_solver import FlowParams, epsilon_continuation
from .frequency_analysis import caloric_trajectory, classify_point, gap_constants, probe
from .interface_extraction import (
    lipschitz_ratio_series,
    random_sample_pairs,
    support_labels,
    write_interface_csv,
)
from .partition_oracle import optimal_partition_1d, optimal_partition_2d_search
from .registry_utils import REGISTRY_ENV, finish_run, register_run

logger = logging.getLogger(__name__)


def _out_dir(args, config):
    return Path(args.out or config.output_dir)


def _registry(args, config):
    if args.no_registry:
        return None
    return args.registry or config.registry or os.environ.get(REGISTRY_ENV)


def _register(args, config, command, out_dir, objective=None, lambda_summary=None, status="completed"):
    url = _registry(args, config)
    if not url:
        return None
    return register_run(url, config.name, command, out_dir, dump_config(config), objective, lambda_summary, status)


def cmd_run(args):
    """Integrate the flow and write series, snapshots and the resolved config.

    With a registry the run is recorded as running first and then marked
    completed or failed.
    """
    config = load_config(args.config)
    out_dir = artifacts.ensure_dir(_out_dir(args, config))
    run_id = _register(args, config, "run", out_dir, status="running")
    try:
        lambda_summary = _run(config, out_dir)
    except SegflowError:
        if run_id is not None:
            finish_run(_registry(args, config), run_id, "failed")
        raise
    if run_id is not None:
        finish_run(_registry(args, config), run_id, "completed", lambda_summary=lambda_summary)
    return 0


def _run(config, out_dir):
    paths = artifacts.run_paths(out_dir)
    grid = config.build_grid()

    if config.initial.preset in CALORIC_PRESETS:
        if config.flow.m != 1:
            raise ConfigurationError("caloric fixtures have one component", field="flow.m")
        dt = 0.1 * config.flow.t_end if config.flow.dt == "auto" else float(config.flow.dt)
        n_times = int(round(config.flow.t_end / dt)) + 1
        traj = caloric_trajectory(grid, config.initial.preset.split("_")[1], np.linspace(0.0, config.flow.t_end, n_times))
        config.flow.dt = dt
    else:
        g = initial_data(config, grid)
        dt = resolve_dt(config, g)
        config.flow.dt = dt
        params = FlowParams(
            epsilon=config.epsilon,
            dt=dt,
            t_end=config.flow.t_end,
            m=config.flow.m,
            c=tuple(config.flow.c),
            theta=config.flow.theta,
            clip_negative=config.flow.clip_negative,
            kappa=config.flow.kappa,
        )
        traj = epsilon_continuation(
            g,
            params,
            config.flow.eps_schedule,
            config.flow.stage_durations,
            snapshot_stride=config.flow.snapshot_stride,
            series_stride=config.flow.series_stride,
        )

    paths["resolved_config"].write_text(dump_config(config), encoding="utf-8")
    artifacts.write_series_csv(paths["series"], traj)
    artifacts.write_csv(paths["stages"], pd.DataFrame(traj.stages, columns=["stage", "epsilon", "dt", "dt_cap", "t_start", "t_end"]))
    artifacts.write_trajectory(out_dir, traj)

    final = traj.final
    lambda_summary = " ".join("%.17g" % x for x in final.lam)
    print(f"run {config.name}: t={final.t:.17g} lambda=[{lambda_summary}] -> {out_dir}")
    return lambda_summary


def _load_trajectory(args, config):
    traj_dir = Path(args.traj) if args.traj else _out_dir(args, config)
    return traj_dir, artifacts.read_trajectory(traj_dir)


def cmd_freq(args):
    """Probe I, H, N at every configured base and classify each point."""
    config = load_config(args.config)
    traj_dir, traj = _load_trajectory(args, config)
    if not config.probe.bases:
        raise ConfigurationError("no probe bases configured", field="probe.bases")
    delta = gap_constants(2, 3).delta

    results = []
    for base in config.probe.bases:
        x0, t0 = base[:-1], base[-1]
        radii = None if config.probe.radii == "auto" else config.probe.radii
        try:
            result = probe(traj, x0, t0, radii, include_penalty=config.probe.include_penalty)
        except RangeError as e:
            raise MissingArtifactError(f"no snapshots cover the probe at {base}: {e}")
        point_class = classify_point(result.alpha_hat, delta, config.probe.class_tol)
        results.append((result, point_class))
        print(
            "probe x0=%s t0=%.17g alpha_hat=%.17g fitted_C=%.17g class=%s"
            % (list(x0), t0, result.alpha_hat, result.fitted_C, point_class.value)
        )

    paths = artifacts.run_paths(traj_dir)
    artifacts.write_csv(paths["probes"], artifacts.probe_frame(results))
    if config.flow.m > 1 and config.probe.lipschitz_pairs > 0:
        pairs = random_sample_pairs(traj.grid, config.probe.lipschitz_pairs, config.seed)
        artifacts.write_csv(paths["lipschitz"], lipschitz_ratio_series(traj, pairs))
    _register(args, config, "freq", traj_dir)
    return 0


def _oracle_objective(config, grid):
    if grid.geometry != "box":
        return None
    if grid.dim == 1:
        return optimal_partition_1d(grid.extents[0], config.flow.m).objective
    if config.flow.m in (2, 4):
        return optimal_partition_2d_search(grid, config.flow.m, config.oracle.family, config.oracle.stride).objective
    return None


def cmd_partition(args):
    """Detect the multiplier plateau, extract the limit partition and write the report."""
    config = load_config(args.config)
    traj_dir, traj = _load_trajectory(args, config)
    series = traj.series
    if series.empty or not any(c.startswith("lambda_") for c in series.columns):
        raise MissingArtifactError(f"no multiplier series under {traj_dir}")

    t_plateau = detect_plateau(series, config.partition.rel_tol, config.partition.window)
    if t_plateau is None:
        raise NoPlateauError(
            f"no plateau: multipliers still vary by more than {config.partition.rel_tol:g} "
            f"over a window of {config.partition.window:g} at t={series['t'].iloc[-1]:.6g}"
        )
    partition, report = extract_limit(
        traj,
        t_plateau,
        config.partition.threshold,
        oracle_objective=_oracle_objective(config, traj.grid),
        c=config.flow.c,
    )

    paths = artifacts.run_paths(traj_dir)
    artifacts.write_json(paths["report"], report.to_dict())
    artifacts.write_json(
        paths["partition"],
        {
            "eigvals": list(partition.eigvals),
            "objective": partition.objective,
            "support_nodes": [int(s.sum()) for s in partition.supports],
        },
    )
    artifacts.write_fields(paths["eigenfunctions"], traj.grid, partition.eigfuns, "eigfun", t=traj.final.t)
    write_interface_csv(paths["interface"], [support_labels(traj.final, config.partition.threshold)])

    print(
        "partition: t_plateau=%.17g lambda_inf=[%s] objective=%.17g"
        % (t_plateau, " ".join("%.17g" % x for x in report.lambda_inf), partition.objective)
    )
    if report.oracle_objective is not None:
        print("oracle objective=%.17g" % report.oracle_objective)
    _register(args, config, "partition", traj_dir, objective=partition.objective)
    return 0


def cmd_oracle(args):
    """Print (and optionally write) the reference optimal partition."""
    if args.m is None or args.m < 1:
        raise ConfigurationError(f"m must be at least 1, got {args.m}", field="oracle.m")
    if args.dim == 1:
        if args.length is None or not args.length > 0:
            raise ConfigurationError("1-D oracle needs a positive --length", field="oracle.length")
        result = optimal_partition_1d(args.length, args.m)
    else:
        extents = args.extents or [1.0, 1.0]
        counts = args.counts or [65, 65]
        grid = build_grid(2, extents, counts)
        if args.m not in (2, 4):
            raise ConfigurationError(f"2-D line-cut oracle supports m in (2, 4), got {args.m}", field="oracle.m")
        result = optimal_partition_2d_search(grid, args.m, args.family, args.stride)
    if args.out:
        artifacts.write_json(args.out, result.to_dict())
    print("objective=%.17g eigvals=[%s]" % (result.objective, " ".join("%.17g" % x for x in result.eigvals)))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="segflow", description="Segregating constrained heat flow laboratory")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    p.add_argument("--log-file", type=str, default=None)
    p.add_argument("--registry", type=str, default=None, help="SQLAlchemy URL of the run registry")
    p.add_argument("--no-registry", action="store_true", help="Never touch the run registry")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="Integrate the flow and write a trajectory")
    pr.add_argument("config", type=str)
    pr.add_argument("--out", type=str, default=None)
    pr.set_defaults(func=cmd_run)

    pf = sub.add_parser("freq", help="Frequency probes on a written trajectory")
    pf.add_argument("config", type=str)
    pf.add_argument("--traj", type=str, default=None, help="Trajectory directory (default: config output dir)")
    pf.add_argument("--out", type=str, default=None)
    pf.set_defaults(func=cmd_freq)

    pp = sub.add_parser("partition", help="Extract the limit partition and convergence report")
    pp.add_argument("config", type=str)
    pp.add_argument("--traj", type=str, default=None)
    pp.add_argument("--out", type=str, default=None)
    pp.set_defaults(func=cmd_partition)

    po = sub.add_parser("oracle", help="Reference optimal partition")
    po.add_argument("--dim", type=int, choices=[1, 2], default=1)
    po.add_argument("--length", type=float, default=1.0)
    po.add_argument("--m", type=int, default=None)
    po.add_argument("--extents", type=float, nargs=2, default=None)
    po.add_argument("--counts", type=int, nargs=2, default=None)
    po.add_argument("--family", type=str, default="axis-aligned-lines")
    po.add_argument("--stride", type=int, default=1)
    po.add_argument("--out", type=str, default=None)
    po.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    configure_logging(level, args.log_file)
    try:
        return args.func(args)
    except SegflowError as e:
        print(f"segflow {args.command}: error: {e}", file=sys.stderr)
        logger.debug("failure details", exc_info=True)
        return e.exit_code
