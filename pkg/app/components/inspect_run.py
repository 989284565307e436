from pathlib import Path

import pandas as pd
import streamlit as st

from segflow.artifact_utils import list_outputs, read_json, read_trajectory, run_paths
from segflow.errors import SegflowError
from segflow.flow_solver import energy_increase_by_stage
from ui_components import plot_probe, plot_snapshot

ENERGY_TOLERANCE = 1e-8


@st.cache_resource(ttl=300)
def load_trajectory(run_dir):
    return read_trajectory(run_dir)


def show_series(traj):
    """Multiplier and energy charts plus the per-stage energy verdict."""
    series = traj.series
    if series.empty:
        st.info("No series recorded for this run")
        return
    lambda_cols = [c for c in series.columns if c.startswith("lambda_")]
    st.markdown("### Multipliers")
    st.line_chart(series.set_index("t")[lambda_cols])

    st.markdown("### Energies")
    energy_cols = [c for c in ("dirichlet_energy", "penalty_energy", "total_energy") if c in series.columns]
    st.line_chart(series.set_index("t")[energy_cols])

    if "stage" in series.columns and "total_energy" in series.columns:
        increases = energy_increase_by_stage(series)
        worst = max(increases.values()) if increases else 0.0
        if worst <= ENERGY_TOLERANCE:
            st.success(f"Total energy nonincreasing in every stage (largest relative increase {worst:.2e})")
        else:
            st.warning(f"Total energy increased by up to {worst:.2e} (relative) within a stage")
        st.dataframe(pd.DataFrame(sorted(increases.items()), columns=["stage", "max_relative_increase"]),
                     use_container_width=True)

    with st.expander("Diagnostics"):
        diag_cols = [c for c in ("max_overlap", "clip_mass", "constraint_error", "defect_mass", "pohozaev_residual")
                     if c in series.columns]
        st.line_chart(series.set_index("t")[diag_cols])


def show_snapshots(traj):
    st.markdown("### Snapshots")
    if len(traj.snapshots) == 1:
        k = 0
    else:
        k = st.slider("Snapshot", 0, len(traj.snapshots) - 1, len(traj.snapshots) - 1)
    state = traj.snapshots[k]
    st.pyplot(plot_snapshot(traj.grid, state.u, f"t = {state.t:.6g}  (stage {state.stage}, ε = {state.epsilon:g})"))


def show_probes(paths):
    if not paths["probes"].exists():
        return
    st.markdown("### Frequency probes")
    frame = pd.read_csv(paths["probes"])
    summary = frame[frame["row"] == "summary"]
    st.dataframe(summary[["probe", "x0", "y0", "t0", "alpha_hat", "fitted_C", "growth_alpha", "R0", "pair", "class"]],
                 use_container_width=True)
    st.pyplot(plot_probe(frame))
    if paths["lipschitz"].exists():
        st.markdown("#### Lipschitz ratio")
        st.line_chart(pd.read_csv(paths["lipschitz"]).set_index("t"))


def show_report(paths):
    if not paths["report"].exists():
        return
    st.markdown("### Convergence report")
    report = read_json(paths["report"])
    col1, col2 = st.columns(2)
    with col1:
        st.metric("Objective Σλ₁", f"{report['objective']:.6f}")
    with col2:
        if report.get("oracle_objective") is not None:
            gap = report["objective"] / report["oracle_objective"] - 1.0
            st.metric("Oracle objective", f"{report['oracle_objective']:.6f}", f"{gap:+.2%}", delta_color="inverse")
    defect = pd.DataFrame(report["D_series"], columns=["t", "D"])
    st.line_chart(defect.set_index("t"))
    st.json({k: v for k, v in report.items() if k != "D_series"}, expanded=False)
    st.download_button("⬇️ Download report", paths["report"].read_bytes(),
                       file_name="convergence_report.json", mime="application/json")


def show_inspect_run_page():
    """Display the Inspect Run page."""
    st.header("Inspect a Run")
    run_dir = st.text_input("Run directory", value=st.session_state.get("selected_run_dir") or "")
    if not run_dir:
        st.info("Enter a run directory, or pick a run on the View Runs page")
        return
    st.session_state.selected_run_dir = run_dir
    if not Path(run_dir).is_dir():
        st.error(f"{run_dir} is not a directory")
        return

    paths = run_paths(run_dir)
    st.caption(f"Artifacts: {', '.join(list_outputs(run_dir)) or 'none'}")
    try:
        traj = load_trajectory(run_dir)
    except SegflowError as e:
        st.error(f"Cannot read the trajectory: {e}")
        return

    show_series(traj)
    show_snapshots(traj)
    show_probes(paths)
    show_report(paths)
    if paths["series"].exists():
        st.download_button("⬇️ Download series.csv", paths["series"].read_bytes(),
                           file_name="series.csv", mime="text/csv")
