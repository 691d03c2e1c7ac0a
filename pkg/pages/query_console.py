import io
import time
from dataclasses import replace

import streamlit as st

from riq.config import MATCH_MODES
from riq.errors import RiqError, SparqlSyntaxError
from riq.query_engine import answer_query, binding_table_frame, find_candidates, write_tsv
from riq.reports import candidate_figure, candidate_frame
from riq.sparql import format_query, parse_query

SAMPLE_QUERY = """SELECT ?g ?s ?o WHERE {
  GRAPH ?g {
    ?s <http://example.org/vocab0/p0> ?o .
    OPTIONAL { ?o <http://example.org/vocab0/p1> ?x }
  }
}"""


def display_query_console(index):
    """Run a query and show each stage: candidates, rewrites, results"""
    st.header("🔎 Query Console")

    if index is None:
        st.info("Load an index to run queries against it.")
        return

    if "query_text" not in st.session_state:
        st.session_state.query_text = SAMPLE_QUERY

    with st.form("query_form"):
        text = st.text_area("SPARQL", value=st.session_state.query_text, height=220)
        col1, col2 = st.columns(2)
        with col1:
            match_mode = st.selectbox("Match mode", list(MATCH_MODES))
        with col2:
            candidates_only = st.checkbox("Candidates only")
        submitted = st.form_submit_button("▶️ Run", use_container_width=True)

    if not submitted:
        return
    st.session_state.query_text = text

    try:
        q = parse_query(text)
        started = time.perf_counter()
        report = find_candidates(q, index, match_mode)
        filtered = time.perf_counter()
        table = None if candidates_only else answer_query(q, index, match_mode, candidates=report)
        finished = time.perf_counter()
    except SparqlSyntaxError as e:
        st.error("Syntax error")
        st.code(e.caret())
        return
    except RiqError as e:
        st.error(f"❌ {e}")
        return

    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Candidate groups", f"{len(report.candidate_group_ids)}/{len(index.groups)}")
    with col2:
        st.metric("Membership tests", report.filter_stats.membership_tests)
    with col3:
        st.metric("Filter time", f"{(filtered - started) * 1000:.1f} ms")

    tab1, tab2, tab3 = st.tabs(["📋 Results", "🎯 Candidates", "✂️ Rewritten Queries"])

    with tab1:
        if table is None:
            st.info("Results were skipped (candidates only).")
        else:
            st.caption(f"{len(table)} rows in {(finished - filtered) * 1000:.1f} ms")
            st.dataframe(binding_table_frame(table), use_container_width=True, hide_index=True)
            buffer = io.StringIO()
            write_tsv(table, buffer)
            st.download_button("⬇️ Download TSV", buffer.getvalue(), file_name="results.tsv", mime="text/tab-separated-values")

    with tab2:
        st.plotly_chart(candidate_figure(candidate_frame(report, index)), use_container_width=True)
        st.json(report.filter_stats.to_dict())

    with tab3:
        if not report.candidate_group_ids:
            st.warning("No group can hold an answer.")
        for gid in report.candidate_group_ids:
            with st.expander(f"Group {gid}"):
                st.code(format_query(replace(q, root=report.per_group_pruned_tree[gid])), language="sparql")
