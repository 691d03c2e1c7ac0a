import streamlit as st

from riq.config import DEFAULT_EPSILON
from riq.errors import RiqError
from riq.pv_index import PvIndex, load_index

DEFAULT_INDEX_DIR = "riq-index"


# ------------------------
# Config Loader
# ------------------------
@st.cache_data(ttl=3600)
def get_config():
    """Explorer settings from the optional ``[riq]`` secrets table, with defaults."""
    settings = {"index_dir": DEFAULT_INDEX_DIR, "epsilon": DEFAULT_EPSILON, "seed": 0}
    try:
        section = st.secrets.get("riq", {})
    except FileNotFoundError:
        section = {}
    for key in settings:
        if key in section:
            settings[key] = type(settings[key])(section[key])
    return settings


# ------------------------
# Index Loader
# ------------------------
@st.cache_resource(show_spinner="Loading index...")
def _load(path: str) -> PvIndex:
    return load_index(path)


def open_index(path: str):
    """Load an index once per path; shows the error and returns None when it cannot."""
    try:
        return _load(path)
    except RiqError as e:
        st.error(f"Cannot open index at {path}: {e}")
        return None


def reset_index_cache():
    _load.clear()
