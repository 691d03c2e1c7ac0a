import streamlit as st

from riq.pv_index import index_stats
from riq.reports import filter_bytes_figure, group_frame, group_size_figure, member_frame


def display_index_overview(index):
    """Summary metrics, group charts and the graph directory"""
    st.header("📊 Index Overview")

    if index is None:
        st.info("Point the sidebar at an index directory, or build one in the Dataset Lab.")
        return

    stats = index_stats(index)
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Graphs", stats["graphs"])
    with col2:
        st.metric("Groups", stats["groups"], delta=f"{stats['singleton_groups']} singletons", delta_color="off")
    with col3:
        st.metric("Quads", stats["quads"])
    with col4:
        st.metric("Filter / Data", f"{stats['filter_data_ratio']:.1%}")

    tab1, tab2, tab3 = st.tabs(["📦 Groups", "🗂️ Graphs", "🧾 Manifest"])

    with tab1:
        groups = group_frame(index)
        col1, col2 = st.columns(2)
        with col1:
            st.plotly_chart(group_size_figure(groups), use_container_width=True)
        with col2:
            st.plotly_chart(filter_bytes_figure(groups), use_container_width=True)
        st.dataframe(groups, use_container_width=True, hide_index=True)

    with tab2:
        members = member_frame(index)
        needle = st.text_input("Filter contexts", placeholder="substring of a graph IRI")
        if needle:
            members = members[members["context"].str.contains(needle, regex=False)]
        st.dataframe(members, use_container_width=True, hide_index=True)

    with tab3:
        st.json(index.manifest.to_dict())
