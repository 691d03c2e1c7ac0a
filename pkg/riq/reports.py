from pathlib import Path
from typing import Optional

import pandas as pd
import plotly.express as px

from riq.pv_index import PvIndex, index_stats
from riq.query_engine import CandidateReport


def group_frame(index: PvIndex) -> pd.DataFrame:
    """One row per group: members, quads, filter bytes, worst estimated FP rate."""
    rows = index_stats(index)["per_group"]
    columns = ["group_id", "members", "quads", "filter_bytes", "max_estimated_fp_rate"]
    return pd.DataFrame(rows, columns=columns)


def member_frame(index: PvIndex) -> pd.DataFrame:
    rows = [
        {"group_id": record.group_id, "graph_id": gid, "context": index.contexts[gid].n3()}
        for record in index.groups
        for gid in record.member_graph_ids
    ]
    return pd.DataFrame(rows, columns=["group_id", "graph_id", "context"])


def candidate_frame(report: CandidateReport, index: PvIndex) -> pd.DataFrame:
    frame = group_frame(index)
    frame["candidate"] = frame["group_id"].isin(report.candidate_group_ids)
    return frame


# ------------------------
# Charts
# ------------------------
def group_size_figure(frame: pd.DataFrame):
    return px.bar(frame, x="group_id", y="members", title="Graphs per Group")


def filter_bytes_figure(frame: pd.DataFrame):
    return px.bar(frame, x="group_id", y="filter_bytes", title="Filter Bytes per Group")


def candidate_figure(frame: pd.DataFrame):
    return px.bar(
        frame,
        x="group_id",
        y="members",
        color="candidate",
        title="Candidate Groups",
    )


def write_html_report(index: PvIndex, path, report: Optional[CandidateReport] = None) -> Path:
    """Standalone HTML page with the summary table and charts."""
    stats = index_stats(index)
    frame = group_frame(index)
    figures = [group_size_figure(frame), filter_bytes_figure(frame)]
    if report is not None:
        figures.append(candidate_figure(candidate_frame(report, index)))

    summary = pd.DataFrame(
        [{k: v for k, v in stats.items() if k != "per_group"}]
    ).T.rename(columns={0: "value"})
    parts = [
        "<html><head><meta charset='utf-8'><title>riq index report</title></head><body>",
        f"<h1>Index {index.path or ''}</h1>",
        summary.to_html(),
    ]
    for i, fig in enumerate(figures):
        parts.append(fig.to_html(full_html=False, include_plotlyjs="cdn" if i == 0 else False))
    parts.append("</body></html>")

    out = Path(path)
    out.write_text("\n".join(parts), encoding="utf-8")
    return out
