import streamlit as st

from segflow.debug_utils import debug_print
from segflow.registry_utils import delete_run, get_engine, get_run_data, save_notes
from ui_components import create_notes_form, display_run_header, sanitize_input


@st.cache_data(ttl=300)  # Cache for 5 minutes
def get_cached_runs(url):
    """Cache the registry listing to prevent repeated database calls."""
    return get_run_data(get_engine(url))


def display_run_actions(row):
    """Display action buttons for the run."""
    if f'edit_mode_{row["id"]}' not in st.session_state:
        st.session_state[f'edit_mode_{row["id"]}'] = False

    col1, col2, col3 = st.columns(3)
    with col1:
        if st.button("✏️ Edit Note", key=f"edit_{row['id']}", use_container_width=True, type="primary"):
            st.session_state[f'edit_mode_{row["id"]}'] = True
    with col2:
        if st.button("🔍 Inspect", key=f"inspect_{row['id']}", use_container_width=True):
            st.session_state.selected_run_dir = row['output_dir']
            st.session_state.pending_page = "🔍 Inspect Run"
            st.rerun()
    with col3:
        if st.button("🗑️ Delete", key=f"delete_{row['id']}", use_container_width=True):
            st.session_state[f'confirm_delete_{row["id"]}'] = True


def display_delete_confirmation(row, engine):
    """Ask before removing a run from the registry."""
    if not st.session_state.get(f'confirm_delete_{row["id"]}', False):
        return
    st.warning(f"Remove run '{row['name']}' from the registry? Its files in {row['output_dir']} are kept.")
    col1, col2 = st.columns(2)
    with col1:
        if st.button("Yes, delete", key=f"confirm_yes_{row['id']}", type="primary"):
            if delete_run(engine, row['id']):
                st.success("Run removed from the registry")
                st.cache_data.clear()
            else:
                st.error("Could not delete the run")
            st.session_state[f'confirm_delete_{row["id"]}'] = False
            st.rerun()
    with col2:
        if st.button("Cancel", key=f"confirm_no_{row['id']}"):
            st.session_state[f'confirm_delete_{row["id"]}'] = False
            st.rerun()


def display_run_content(row, engine):
    """Notes in display mode, or the notes form in edit mode."""
    current_notes = row.get('notes') or ''
    if not st.session_state[f'edit_mode_{row["id"]}']:
        if current_notes:
            st.markdown(current_notes)
        else:
            st.caption("No notes yet")
        return

    new_notes, save_clicked, cancel_clicked = create_notes_form(row, current_notes)
    if save_clicked:
        if save_notes(engine, row['id'], sanitize_input(new_notes)):
            st.success("Notes updated successfully!")
            st.cache_data.clear()
            st.session_state[f'edit_mode_{row["id"]}'] = False
            st.rerun()
        else:
            st.error("Could not save notes")
    if cancel_clicked:
        st.session_state[f'edit_mode_{row["id"]}'] = False
        st.rerun()


def show_view_runs_page():
    """Display the View Runs page."""
    st.header("Registered Runs")

    if st.button("🔄 Refresh Data"):
        st.cache_data.clear()
        st.rerun()

    url = st.session_state.registry_url
    engine = get_engine(url)
    df = get_cached_runs(url)

    if df.empty:
        st.info("No runs registered yet. Launch one, or run scripts/populate_runs.py.")
        return

    if 'search_query' not in st.session_state:
        st.session_state.search_query = ""
    search_query = st.text_input("Search runs", value=st.session_state.search_query, key="search_input")
    if search_query != st.session_state.search_query:
        st.session_state.search_query = search_query
    st.caption("(Search by run name, command, status, output directory or notes)")

    if st.session_state.search_query:
        mask = df.apply(lambda row: st.session_state.search_query.lower() in str(row).lower(), axis=1)
        filtered_df = df[mask]
        debug_print(f"Search query '{st.session_state.search_query}' returned {len(filtered_df)} results")
    else:
        filtered_df = df

    if filtered_df.empty:
        st.info("No runs found for your search. Try a different keyword.")
        return

    for _, row in filtered_df.iterrows():
        st.markdown("---")
        display_run_header(row)
        display_run_actions(row)
        display_delete_confirmation(row, engine)
        display_run_content(row, engine)
