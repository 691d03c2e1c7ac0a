import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

from riq import __version__
from riq.config import MATCH_MODES, OUTPUT_FORMATS, get_config
from riq.datagen import GenParams, write_dataset
from riq.errors import RiqError, SparqlSyntaxError
from riq.pv_index import build_index, index_stats, load_index
from riq.query_engine import BindingTable, answer_query, find_candidates, write_json, write_tsv
from riq.rdf_core import ParseReport, read_nquads
from riq.reports import write_html_report
from riq.sparql import parse_query

logger = logging.getLogger("riq")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SYNTAX = 2


def emit_event(event: str, **fields) -> None:
    """One JSON object per line on stderr for harnesses to scrape."""
    print(json.dumps({"event": event, **fields}, sort_keys=True), file=sys.stderr)


def _config_from_args(args: argparse.Namespace):
    keys = [
        "epsilon", "lsh_k", "lsh_l", "seed", "workers", "default_graph", "quad_cap", "match_mode", "output_format",
    ]
    overrides = {key: getattr(args, key, None) for key in keys}
    overrides["strict_parse"] = getattr(args, "strict", None) or None
    overrides["keep_pvs"] = getattr(args, "keep_pvs", None) or None
    return get_config(**overrides)


# ------------------------
# Commands
# ------------------------
def cmd_index(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    started = time.perf_counter()
    report = ParseReport()
    quads = read_nquads(args.input, strict=config.strict_parse, default_graph=config.default_graph, report=report)
    index = build_index(quads, config, args.output)
    elapsed = time.perf_counter() - started

    stats = index_stats(index)
    print(
        f"indexed {stats['graphs']} graphs ({stats['quads']} quads) into {stats['groups']} groups, "
        f"{stats['filter_bytes']} filter bytes, {elapsed:.2f}s"
    )
    emit_event(
        "index",
        graphs=stats["graphs"],
        quads=stats["quads"],
        groups=stats["groups"],
        filter_bytes=stats["filter_bytes"],
        data_bytes=stats["data_bytes"],
        malformed=len(report.malformed),
        seconds=round(elapsed, 6),
    )
    return EXIT_OK


def _read_query_text(args: argparse.Namespace) -> str:
    if args.expr is not None:
        return args.expr
    if args.query == "-":
        return sys.stdin.read()
    path = Path(args.query)
    if not path.is_file():
        raise RiqError(f"{args.query}: no such query file")
    return path.read_text(encoding="utf-8")


def _print_table(table: BindingTable, output_format: str, limit_print: Optional[int]) -> None:
    if limit_print is not None:
        table = BindingTable(table.columns, table.rows[:limit_print])
    if output_format == "json":
        write_json(table, sys.stdout)
    else:
        write_tsv(table, sys.stdout)


def cmd_query(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    text = _read_query_text(args)
    q = parse_query(text)
    index = load_index(args.index)

    started = time.perf_counter()
    report = find_candidates(q, index, config.match_mode, config.workers)
    filtered = time.perf_counter()
    if args.candidates_only:
        json.dump(report.to_dict(q), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        emit_event(
            "candidates",
            groups=len(index.groups),
            candidates=len(report.candidate_group_ids),
            filter_seconds=round(filtered - started, 6),
            **report.filter_stats.to_dict(),
        )
        return EXIT_OK

    table = answer_query(q, index, config.match_mode, config.workers, candidates=report)
    finished = time.perf_counter()
    _print_table(table, config.output_format, args.limit_print)
    emit_event(
        "query",
        groups=len(index.groups),
        candidates=len(report.candidate_group_ids),
        rows=len(table),
        filter_seconds=round(filtered - started, 6),
        execute_seconds=round(finished - filtered, 6),
        **report.filter_stats.to_dict(),
    )
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    index = load_index(args.index)
    stats = index_stats(index)
    if args.json:
        json.dump(stats, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        for key in ("groups", "graphs", "quads", "filter_bytes", "data_bytes", "filter_data_ratio", "largest_group",
                    "singleton_groups", "epsilon"):
            print(f"{key}\t{stats[key]}")
    if args.html:
        write_html_report(index, args.html)
        logger.info("wrote report to %s", args.html)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    params = GenParams(
        vocabularies=args.vocabularies,
        graphs=args.graphs,
        triples=args.triples,
        overlap=args.overlap,
        predicates=args.predicates,
        entities=args.entities,
        seed=args.seed if args.seed is not None else get_config().seed,
    )
    size, truth = write_dataset(params, args.output, args.truth)
    print(f"wrote {params.graphs * params.triples} quads in {params.graphs} graphs to {args.output} ({size} bytes)")
    emit_event("gen", quads=params.graphs * params.triples, graphs=params.graphs, bytes=size, truth=str(truth))
    return EXIT_OK


# ------------------------
# Parser
# ------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--workers", type=int, help="worker count (default: CPU count, env RIQ_WORKERS)")
    common.add_argument("--seed", type=int, help="master seed (env RIQ_SEED)")

    parser = argparse.ArgumentParser(prog="riq", description="RDF quad indexing and SPARQL filtering")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common], help="build an index from N-Quads")
    p.add_argument("-i", "--input", required=True, help="N-Quads path, .gz path, URL or '-'")
    p.add_argument("-o", "--output", required=True, help="index directory")
    p.add_argument("--epsilon", type=float, help="filter false-positive rate (default 0.05)")
    p.add_argument("--lsh-k", dest="lsh_k", type=int, help="LSH band count")
    p.add_argument("--lsh-l", dest="lsh_l", type=int, help="LSH rows per band")
    p.add_argument("--strict", action="store_true", help="fail on the first malformed line")
    p.add_argument("--default-graph", dest="default_graph", help="context IRI for triples without one")
    p.add_argument("--keep-pvs", dest="keep_pvs", action="store_true", help="also dump per-graph pattern vectors")
    p.add_argument("--quad-cap", dest="quad_cap", type=int, help="warn about graphs above this many quads")
    p.set_defaults(handler=cmd_index)

    p = sub.add_parser("query", parents=[common], help="answer a query over an index")
    p.add_argument("-x", "--index", required=True, help="index directory")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("-q", "--query", help="query file or '-'")
    source.add_argument("-e", "--expr", help="query text")
    p.add_argument("--format", dest="output_format", choices=OUTPUT_FORMATS)
    p.add_argument("--match-mode", dest="match_mode", choices=MATCH_MODES)
    p.add_argument("--candidates-only", dest="candidates_only", action="store_true")
    p.add_argument("--limit-print", dest="limit_print", type=int, help="print at most this many rows")
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("stats", parents=[common], help="summarize an index")
    p.add_argument("-x", "--index", required=True, help="index directory")
    p.add_argument("--json", action="store_true")
    p.add_argument("--html", help="write a plotly report to this file")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic N-Quads dataset")
    p.add_argument("-o", "--output", required=True, help="N-Quads file to write")
    p.add_argument("--truth", help="ground-truth JSON path (default: <output>.truth.json)")
    p.add_argument("--vocabularies", type=int, default=5)
    p.add_argument("--graphs", type=int, default=200)
    p.add_argument("--triples", type=int, default=50)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--predicates", type=int, default=8)
    p.add_argument("--entities", type=int, default=40)
    p.set_defaults(handler=cmd_gen)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.handler(args)
    except SparqlSyntaxError as e:
        print(e.caret(), file=sys.stderr)
        return EXIT_SYNTAX
    except RiqError as e:
        print(f"riq: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"riq: {e}", file=sys.stderr)
        return EXIT_ERROR
