import logging

import streamlit as st
from theme import init_theme, get_theme_styles

from segflow.errors import ConfigurationError
from segflow.parallel_utils import THREADS_ENV, max_workers

PAGES = ["📋 View Runs", "➕ Launch Run", "🔍 Inspect Run"]
LOG_LEVELS = ["DEBUG", "INFO", "WARNING"]


def _theme_button():
    dark = st.session_state.theme == "dark"
    label = "🌞 Light Mode" if dark else "🌙 Dark Mode"
    if st.button(label, use_container_width=True):
        st.session_state.theme = "light" if dark else "dark"
        st.rerun()


def _debug_button():
    on = st.session_state.debug_mode
    if st.button("🔨 Debug On" if on else "🔧 Debug Off", use_container_width=True):
        st.session_state.debug_mode = not on
        logging.getLogger("segflow").setLevel(logging.DEBUG if not on else logging.INFO)
        st.rerun()


def _debug_options():
    with st.expander("🔍 Debug Options", expanded=False):
        logger = logging.getLogger("segflow")
        current = logging.getLevelName(logger.level)
        level = st.selectbox(
            "segflow log level", LOG_LEVELS, index=LOG_LEVELS.index(current) if current in LOG_LEVELS else 1
        )
        logger.setLevel(level)
        try:
            st.caption(f"{THREADS_ENV}: {max_workers()} worker(s)")
        except ConfigurationError as e:
            st.caption(f"{THREADS_ENV}: {e}")
        if st.button("🗑️ Clear Caches", use_container_width=True):
            st.cache_data.clear()
            st.cache_resource.clear()
            st.rerun()


def setup_navigation():
    """Sidebar: settings, page selector and the current run; returns the chosen page."""
    init_theme()
    st.markdown(get_theme_styles(), unsafe_allow_html=True)

    with st.sidebar:
        st.title("🌡️ segflow")
        st.caption("Segregating heat flow runs, probes and partitions")

        st.markdown("### ⚙️ Settings")
        theme_col, debug_col = st.columns(2)
        with theme_col:
            _theme_button()
        with debug_col:
            _debug_button()
        if st.session_state.debug_mode:
            _debug_options()

        st.markdown("---")
        if 'page' not in st.session_state:
            st.session_state.page = PAGES[0]
        # set by buttons that jump to another page; applied before the radio exists
        if 'pending_page' in st.session_state:
            st.session_state.page = st.session_state.pop('pending_page')
        page = st.radio("Pages", PAGES, label_visibility="collapsed", key="page")

        st.markdown("---")
        if st.session_state.get('selected_run_dir'):
            st.caption(f"run: `{st.session_state.selected_run_dir}`")
        st.caption(f"registry: {st.session_state.get('registry_url', '')}")

    return page
