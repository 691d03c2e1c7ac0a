import streamlit as st

# ------------------------
# Page Components
# ------------------------
from pages.index_overview import display_index_overview
from pages.query_console import display_query_console
from pages.dataset_lab import display_dataset_lab
from pages.settings import display_settings_page

# ------------------------
# Utilities
# ------------------------
from utils.config import get_config, open_index

# ------------------------
# Page Configuration
# ------------------------
st.set_page_config(
    page_title="RIQ Index Explorer",
    page_icon="🧭",
    layout="wide",
    initial_sidebar_state="expanded"
)

# Custom CSS
st.markdown("""
<style>
.main-header {
    background: linear-gradient(120deg, #1f4e79 0%, #2e8b57 100%);
    padding: 1.5rem 2rem;
    border-radius: 8px;
    color: white;
    margin-bottom: 1.5rem;
}
.index-badge {
    display: inline-block;
    padding: 0.2rem 0.6rem;
    border-radius: 12px;
    font-size: 0.75rem;
    font-family: monospace;
}
.loaded-badge { background: #d4edda; color: #155724; }
.missing-badge { background: #f8d7da; color: #721c24; }
</style>
""", unsafe_allow_html=True)

# ------------------------
# Global Initialization
# ------------------------
config = get_config()


# ------------------------
# Main Application
# ------------------------
def main():
    if "index_dir" not in st.session_state:
        st.session_state.index_dir = config["index_dir"]

    st.markdown("""
    <div class="main-header">
        <h1>🧭 RIQ Index Explorer</h1>
        <p>Inspect pattern-vector indexes and watch queries get filtered, rewritten and answered</p>
    </div>
    """, unsafe_allow_html=True)

    with st.sidebar:
        st.session_state.index_dir = st.text_input("📁 Index directory", value=st.session_state.index_dir)
        index = open_index(st.session_state.index_dir) if st.session_state.index_dir else None
        if index is not None:
            st.markdown(
                f'<span class="index-badge loaded-badge">{len(index.groups)} groups / {index.graph_count} graphs</span>',
                unsafe_allow_html=True,
            )
        else:
            st.markdown('<span class="index-badge missing-badge">no index loaded</span>', unsafe_allow_html=True)

        st.markdown("---")

        # Navigation
        page = st.selectbox(
            "🧭 Navigation",
            ["📊 Index Overview", "🔎 Query Console", "🧪 Dataset Lab", "⚙️ Settings"]
        )

    # Main content
    if page == "📊 Index Overview":
        display_index_overview(index)
    elif page == "🔎 Query Console":
        display_query_console(index)
    elif page == "🧪 Dataset Lab":
        display_dataset_lab(config)
    elif page == "⚙️ Settings":
        display_settings_page(index, config)


# ------------------------
# Run App
# ------------------------
if __name__ == "__main__":
    main()
