import streamlit as st


def init_theme():
    """Initialize theme settings."""
    if 'theme' not in st.session_state:
        st.session_state.theme = "dark"


def theme_colors():
    """Foreground, background and panel colours for the current theme."""
    is_dark = st.session_state.theme == "dark"
    return {
        "fg": '#FFFFFF' if is_dark else '#000000',
        "bg": '#0E1117' if is_dark else '#FFFFFF',
        "panel": '#1E1E1E' if is_dark else '#F0F2F6',
        "link": '#4B8BBE' if is_dark else '#0066CC',
    }


def get_theme_styles():
    """Return CSS styles based on current theme."""
    c = theme_colors()
    return f"""
        <style>
            .stApp {{
                background-color: {c['bg']};
            }}
            .stMarkdown, .stText, .stCaption, .stInfo, .stSuccess, .stWarning, .stError {{
                color: {c['fg']};
            }}
            h1, h2, h3, h4, h5, h6,
            .stMarkdown h1, .stMarkdown h2, .stMarkdown h3 {{
                color: {c['fg']};
            }}
            /* Run names in expanders */
            .streamlit-expanderHeader {{
                color: {c['fg']};
            }}
            .stAlert {{
                background-color: {c['panel']};
                color: {c['fg']};
            }}
            .stAlert p, .stAlert div {{
                color: {c['fg']} !important;
            }}
            hr {{
                border-color: {c['fg']};
            }}
            .stTextInput > div > div > input, .stTextArea > div > div > textarea {{
                color: {c['fg']};
                background-color: {c['panel']};
            }}
            .stButton > button {{
                color: {c['fg']};
                background-color: {c['panel']};
                border: 1px solid {c['fg']};
            }}
            a {{
                color: {c['link']};
            }}
            .stTextInput > label {{
                color: {c['fg']};
            }}
        </style>
    """


def apply_plot_theme(fig, ax):
    """Match a matplotlib figure to the dashboard theme."""
    c = theme_colors()
    fig.patch.set_facecolor(c['bg'])
    ax.set_facecolor(c['bg'])
    ax.tick_params(colors=c['fg'])
    for spine in ax.spines.values():
        spine.set_color(c['fg'])
    ax.xaxis.label.set_color(c['fg'])
    ax.yaxis.label.set_color(c['fg'])
    ax.title.set_color(c['fg'])
