from pathlib import Path

import streamlit as st

from segflow.cli import main as segflow_main
from segflow.config_utils import CALORIC_PRESETS, parse_config
from segflow.debug_utils import debug_print
from segflow.errors import ConfigurationError

CONFIG_DIR = Path("configs")
EXIT_MESSAGES = {
    1: "numerical or domain failure",
    2: "configuration or usage error",
    3: "missing trajectory artifacts",
    4: "no multiplier plateau by the end of the run",
}


def list_preset_configs():
    return sorted(CONFIG_DIR.glob("*.toml"))


def run_command(command, config_path):
    """Run one segflow subcommand against a config; returns the exit code."""
    argv = ["--registry", st.session_state.registry_url, command, str(config_path)]
    debug_print(f"segflow {' '.join(argv)}")
    with st.spinner(f"segflow {command} {config_path.name} ..."):
        code = segflow_main(argv)
    if code == 0:
        st.success(f"{command} finished")
    else:
        st.error(f"{command} failed with exit code {code}: {EXIT_MESSAGES.get(code, 'unknown error')}")
    return code


def show_launch_run_page():
    """Display the Launch Run page."""
    st.header("Launch a Run")

    presets = list_preset_configs()
    source = st.radio("Configuration", ["Preset file", "Paste TOML"], horizontal=True)
    if source == "Preset file":
        if not presets:
            st.info(f"No configs found under {CONFIG_DIR}/")
            return
        chosen = st.selectbox("Config file", presets, format_func=lambda p: p.name)
        text = chosen.read_text(encoding="utf-8")
        st.code(text, language="toml")
    else:
        text = st.text_area("TOML configuration", height=300,
                            help="Same layout as the files under configs/")

    with st.form("launch_run_form"):
        col1, col2 = st.columns(2)
        with col1:
            do_freq = st.checkbox("Run frequency probes afterwards", value=True)
        with col2:
            do_partition = st.checkbox("Extract the limit partition afterwards", value=True)
        submitted = st.form_submit_button("🚀 Launch", type="primary", use_container_width=True)

    if not submitted:
        return
    if not text or not text.strip():
        st.error("Please provide a configuration")
        return
    try:
        config = parse_config(text, source="dashboard")
    except ConfigurationError as e:
        st.error(f"Invalid configuration: {e}")
        return

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = chosen if source == "Preset file" else out_dir / "submitted_config.toml"
    if source != "Preset file":
        config_path.write_text(text, encoding="utf-8")

    if run_command("run", config_path) != 0:
        return
    if do_freq and config.probe.bases:
        run_command("freq", config_path)
    if do_partition and config.initial.preset not in CALORIC_PRESETS:
        run_command("partition", config_path)

    st.cache_data.clear()
    st.session_state.selected_run_dir = str(out_dir)
    st.info(f"Artifacts are in {out_dir}; open 🔍 Inspect Run to browse them.")
