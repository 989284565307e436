import re
from datetime import datetime

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import streamlit as st

from segflow.debug_utils import debug_print
from theme import apply_plot_theme


def sanitize_markdown(text):
    """Sanitize markdown content."""
    if not text:
        return ""
    text = re.sub(r'([*_~])', r'\\\1', text)
    return text.strip()


def sanitize_input(text):
    """Sanitize user input."""
    if not text:
        return ""
    text = re.sub(r'<[^>]+>', '', text)
    text = re.sub(r'javascript:', '', text, flags=re.IGNORECASE)
    return text.strip()


def format_timestamp(timestamp):
    """Format a registry timestamp (stored as UTC) into a readable string."""
    if timestamp is None or (isinstance(timestamp, float) and np.isnan(timestamp)):
        return "unknown time"
    if isinstance(timestamp, str):
        try:
            timestamp = datetime.fromisoformat(timestamp)
        except ValueError:
            return timestamp
    return f"{timestamp.strftime('%B %d, %Y at %I:%M %p')} (UTC)"


def show_debug_panel():
    """Display a panel with the buffered segflow log messages."""
    if not st.session_state.get('debug_mode', False):
        return
    buffer = st.session_state.get('debug_buffer')
    with st.expander("Debug Messages", expanded=True):
        if buffer is not None and buffer.messages:
            if st.button("Clear Debug Messages"):
                buffer.clear()
                st.rerun()
            with st.container():
                for msg in reversed(buffer.messages):
                    st.text(msg)
        else:
            st.info("No debug messages yet")


def display_run_header(row):
    """Display the run header with its summary values."""
    col1, col2 = st.columns([2, 1])
    with col1:
        st.markdown(f"### 🧪 {sanitize_markdown(row['name'])}")
        st.markdown(f"**Command:** `{row['command']}`")
        st.markdown(f"**Status:** {row['status']}")
        st.markdown(f"**Output:** `{row['output_dir']}`")
    with col2:
        objective = row.get('objective')
        if objective is not None and not pd.isna(objective):
            st.metric("Objective Σλ₁", f"{float(objective):.6f}")
        if row.get('lambda_summary'):
            st.caption(f"λ at end: {row['lambda_summary']}")
        st.caption(f"🕒 {format_timestamp(row.get('last_updated'))}")


def create_notes_form(row, current_notes):
    """Create a form for editing run notes; returns (notes, saved, cancelled)."""
    with st.form(key=f"notes_form_{row['id']}"):
        new_notes = st.text_area("Notes", value=current_notes, height=150,
                                 help="Observations about this run")
        col1, col2 = st.columns(2)
        with col1:
            save_clicked = st.form_submit_button("💾 Save Changes", use_container_width=True, type="primary")
        with col2:
            cancel_clicked = st.form_submit_button("❌ Cancel", use_container_width=True, type="secondary")
    return new_notes, save_clicked, cancel_clicked


def plot_snapshot(grid, u, title=""):
    """Line plot per component (1-D) or a label image of the dominant component (2-D)."""
    fig, ax = plt.subplots(figsize=(6, 3.5 if grid.dim == 1 else 5))
    if grid.dim == 1:
        x = grid.axis(0)
        for j, uj in enumerate(u):
            ax.plot(x, uj, label=f"u{j + 1}")
        ax.set_xlabel("x")
        ax.legend(loc="upper right")
    else:
        owner = np.where(np.max(u, axis=0) > 0, np.argmax(u, axis=0) + 1, 0)
        image = ax.imshow(owner.T, origin="lower", extent=(0, grid.extents[0], 0, grid.extents[1]),
                          cmap="tab10", vmin=0, vmax=10)
        ax.contour(grid.axis(0), grid.axis(1), np.sum(u, axis=0).T, levels=8, colors="white", linewidths=0.5)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(image, ax=ax, label="dominant component")
    ax.set_title(title)
    apply_plot_theme(fig, ax)
    debug_print(f"plotted snapshot {title}")
    return fig


def plot_probe(frame):
    """N(R) + C R^4 against R for every probe in a probe table."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    radius_rows = frame[frame["row"] == "radius"]
    summary = frame[frame["row"] == "summary"].set_index("probe")
    for probe_id, rows in radius_rows.groupby("probe"):
        C = summary.loc[probe_id, "fitted_C"] if probe_id in summary.index else 0.0
        ax.plot(rows["R"], rows["N"] + C * rows["R"] ** 4, marker="o", label=f"probe {probe_id}")
    ax.set_xscale("log")
    ax.set_xlabel("R")
    ax.set_ylabel("N + C R⁴")
    if len(summary) <= 10:
        ax.legend(loc="best", fontsize="small")
    apply_plot_theme(fig, ax)
    return fig
