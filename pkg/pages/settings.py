from dataclasses import asdict

import pandas as pd
import streamlit as st

from riq import __version__
from riq.config import ENV_OVERRIDES, get_config as get_riq_config
from riq.errors import ConfigError


def display_settings_page(index, settings: dict):
    """Display effective configuration and index parameters"""

    st.header("⚙️ Settings & Configuration")

    tab1, tab2, tab3 = st.tabs(["🔧 Configuration", "🧮 Index Parameters", "ℹ️ About"])

    with tab1:
        configuration_tab(settings)

    with tab2:
        index_parameters_tab(index)

    with tab3:
        about_tab()


def configuration_tab(settings: dict):
    """Explorer secrets and the effective library configuration"""
    st.subheader("🔧 Explorer Settings")
    st.caption("Read from the optional [riq] table in .streamlit/secrets.toml")

    col1, col2, col3 = st.columns(3)
    with col1:
        st.info(f"**Index directory**\n{settings['index_dir']}")
    with col2:
        st.info(f"**Epsilon**\n{settings['epsilon']}")
    with col3:
        st.info(f"**Seed**\n{settings['seed']}")

    st.subheader("🧰 Effective Configuration")
    try:
        config = get_riq_config()
    except ConfigError as e:
        st.error(f"❌ {e}")
        return
    values = asdict(config)
    env_names = {attr: name for name, (attr, _) in ENV_OVERRIDES.items()}
    frame = pd.DataFrame(
        [{"setting": key, "value": str(value), "env": env_names.get(key, "")} for key, value in values.items()]
    )
    st.dataframe(frame, use_container_width=True, hide_index=True)


def index_parameters_tab(index):
    """Hash families and filter parameters frozen into the loaded index"""
    st.subheader("🧮 Index Parameters")

    if index is None:
        st.info("No index loaded.")
        return

    manifest = index.manifest
    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Epsilon", manifest.epsilon)
    with col2:
        st.metric("LSH bands x rows", f"{manifest.lsh.k} x {manifest.lsh.l}")
    with col3:
        st.metric("Format version", manifest.version)

    st.markdown("### 🔑 Hash Families")
    st.json({"rabin": manifest.rabin.to_dict(), "lsh": manifest.lsh.to_dict(), "filter_seeds": list(manifest.filter_seeds)})

    st.markdown("### 🧾 Checksums")
    st.dataframe(
        pd.DataFrame(sorted(manifest.checksums.items()), columns=["file", "sha256"]),
        use_container_width=True,
        hide_index=True,
    )


def about_tab():
    """About and help information"""
    st.subheader("ℹ️ About RIQ Index Explorer")

    st.markdown("""
    ### 🧭 RIQ Index Explorer

    A browser front end over the `riq` library:

    - **📊 Index Overview:** group sizes, filter sizes and the graph directory
    - **🔎 Query Console:** candidate groups, per-group rewritten queries and results
    - **🧪 Dataset Lab:** synthetic datasets with ground truth, and index builds

    The same operations are available from the command line as `python -m riq`.
    """)

    st.info(f"**Version:** {__version__}")
