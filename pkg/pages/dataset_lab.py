import time
from pathlib import Path

import streamlit as st

from riq.config import get_config as get_riq_config
from riq.datagen import GenParams, write_dataset
from riq.errors import RiqError
from riq.pv_index import build_index, index_stats
from riq.rdf_core import ParseReport, read_nquads
from utils.config import reset_index_cache


def display_dataset_lab(settings: dict):
    """Generate synthetic datasets and build indexes over N-Quads files"""
    st.header("🧪 Dataset Lab")

    tab1, tab2 = st.tabs(["🎲 Generate", "🏗️ Build Index"])

    with tab1:
        generate_tab(settings)

    with tab2:
        build_tab(settings)


def generate_tab(settings: dict):
    st.subheader("🎲 Synthetic Dataset")

    with st.form("gen_form"):
        col1, col2, col3 = st.columns(3)
        with col1:
            vocabularies = st.number_input("Vocabularies", 1, 100, 5)
            graphs = st.number_input("Graphs", 1, 100000, 200)
        with col2:
            triples = st.number_input("Triples per graph", 1, 10000, 50)
            predicates = st.number_input("Predicates per vocabulary", 1, 1000, 8)
        with col3:
            overlap = st.slider("Shared predicate share", 0.0, 1.0, 0.0, 0.05)
            entities = st.number_input("Entities per vocabulary", 1, 10000, 40)
        out_path = st.text_input("Output file", value="synthetic.nq")
        submitted = st.form_submit_button("🎲 Generate", use_container_width=True)

    if submitted:
        params = GenParams(
            vocabularies=int(vocabularies),
            graphs=int(graphs),
            triples=int(triples),
            overlap=float(overlap),
            predicates=int(predicates),
            entities=int(entities),
            seed=int(settings["seed"]),
        )
        try:
            with st.spinner("Generating quads..."):
                size, truth = write_dataset(params, out_path)
        except (RiqError, OSError) as e:
            st.error(f"❌ {e}")
            return
        st.success(f"✅ Wrote {params.graphs * params.triples} quads ({size:,} bytes) to {out_path}")
        st.caption(f"Ground truth: {truth}")
        st.session_state.dataset_path = out_path


def build_tab(settings: dict):
    st.subheader("🏗️ Build an Index")

    with st.form("build_form"):
        source = st.text_input("N-Quads source (path, .gz or URL)", value=st.session_state.get("dataset_path", ""))
        out_dir = st.text_input("Index directory", value=st.session_state.get("index_dir", settings["index_dir"]))
        col1, col2 = st.columns(2)
        with col1:
            epsilon = st.number_input("Filter false-positive rate", 0.0001, 0.5, float(settings["epsilon"]), format="%.4f")
        with col2:
            strict = st.checkbox("Strict parsing")
        submitted = st.form_submit_button("🏗️ Build", use_container_width=True)

    if not submitted:
        return
    if not source or not out_dir:
        st.warning("Both a source and an index directory are required.")
        return

    try:
        config = get_riq_config(epsilon=float(epsilon), seed=int(settings["seed"]), strict_parse=strict, workers=1)
        report = ParseReport()
        started = time.perf_counter()
        with st.spinner("Indexing..."):
            quads = read_nquads(source, strict=config.strict_parse, default_graph=config.default_graph, report=report)
            index = build_index(quads, config, Path(out_dir))
    except (RiqError, OSError) as e:
        st.error(f"❌ {e}")
        return

    stats = index_stats(index)
    st.success(f"✅ Indexed {stats['graphs']} graphs into {stats['groups']} groups in {time.perf_counter() - started:.2f}s")
    if report.malformed:
        st.warning(f"Skipped {len(report.malformed)} malformed lines")
    reset_index_cache()
    st.session_state.index_dir = out_dir
