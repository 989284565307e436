import logging

import streamlit as st

from segflow.debug_utils import MessageBuffer
from segflow.registry_utils import create_runs_table, get_engine, registry_url

# Set page config - MUST be first Streamlit command
st.set_page_config(
    page_title="segflow runs",
    page_icon="🌡️",
    initial_sidebar_state="expanded"
)

from navigation import PAGES, setup_navigation
from ui_components import show_debug_panel
from components.view_runs import show_view_runs_page
from components.launch_run import show_launch_run_page
from components.inspect_run import show_inspect_run_page

if 'registry_url' not in st.session_state:
    st.session_state.registry_url = registry_url()

# Initialize registry table
try:
    create_runs_table(get_engine(st.session_state.registry_url))
except Exception as e:
    st.error(f"Error initializing the run registry at {st.session_state.registry_url}: {e}")
    st.stop()

# Initialize session states
if 'debug_mode' not in st.session_state:
    st.session_state.debug_mode = False

if 'selected_run_dir' not in st.session_state:
    st.session_state.selected_run_dir = None

if 'debug_buffer' not in st.session_state:
    buffer = MessageBuffer(capacity=50)
    segflow_logger = logging.getLogger("segflow")
    segflow_logger.addHandler(buffer)
    if segflow_logger.level == logging.NOTSET:
        segflow_logger.setLevel(logging.INFO)
    st.session_state.debug_buffer = buffer

# Setup navigation and get current page
page = setup_navigation()

# Display the appropriate page based on selection
if page == PAGES[0]:
    show_view_runs_page()
elif page == PAGES[1]:
    show_launch_run_page()
elif page == PAGES[2]:
    show_inspect_run_page()

show_debug_panel()
