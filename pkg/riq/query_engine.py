import copy
import json
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import pandas as pd
from rdflib import Literal, URIRef
from rdflib.namespace import XSD

from riq.errors import DegenerateQuery, UnsupportedExpression
from riq.pattern_vectors import PATTERNS, CanonicalPattern, PatternVector, TriplePattern, Variable, pv_of_bgp
from riq.prob_filters import (
    EmptyFilter,
    bf_contains_all,
    build_bloom,
    build_counting,
    cbf_contains_all,
)
from riq.pv_index import GroupRecord, PvIndex
from riq.rdf_core import GraphStore, Term, Triple
from riq.sparql import (
    BgpTreeNode,
    BinaryExpr,
    CallExpr,
    Expr,
    NodeKind,
    NotExpr,
    Query,
    ResultModifiers,
    TermExpr,
    VarExpr,
    format_query,
)

logger = logging.getLogger(__name__)

Solution = Dict[str, Term]
Row = Tuple[Optional[Term], ...]


# ------------------------
# Filtering
# ------------------------
@dataclass
class FilterStats:
    groups_tested: int = 0
    membership_tests: int = 0
    cells_compared: int = 0

    def merge(self, other: "FilterStats") -> None:
        self.groups_tested += other.groups_tested
        self.membership_tests += other.membership_tests
        self.cells_compared += other.cells_compared

    def to_dict(self) -> dict:
        return {
            "groups_tested": self.groups_tested,
            "membership_tests": self.membership_tests,
            "cells_compared": self.cells_compared,
        }


def is_match(
    bgp: Sequence[TriplePattern],
    group: GroupRecord,
    match_mode: str = "homomorphic",
    stats: Optional[FilterStats] = None,
    pv: Optional[PatternVector] = None,
) -> bool:
    """Filter-level containment of a BGP's pattern vector in a group.

    Query filters are built with each group filter's own parameters. In
    homomorphic mode the query multiplicities are clamped to 1, since two
    patterns with the same masked form may bind one data triple.
    """
    if stats is not None:
        stats.membership_tests += 1
    q = pv if pv is not None else pv_of_bgp(bgp)
    for pattern in PATTERNS:
        fps = q.fingerprints(pattern)
        if len(fps) == 0:
            continue
        container = group.filter_for(pattern)
        if isinstance(container, EmptyFilter):
            return False
        if stats is not None:
            stats.cells_compared += container.params.m_cells
        if pattern is CanonicalPattern.SPO:
            ok = bf_contains_all(container, build_bloom(fps, container.params))
        else:
            mults = 1 if match_mode == "homomorphic" else q.counts(pattern)
            ok = cbf_contains_all(container, build_counting(fps, mults, container.params))
        if not ok:
            return False
    return True


def eval_bgp_tree(
    node: BgpTreeNode,
    group: GroupRecord,
    match_mode: str = "homomorphic",
    stats: Optional[FilterStats] = None,
    pvs: Optional[Dict[Tuple[TriplePattern, ...], PatternVector]] = None,
) -> bool:
    """Evaluate the tree on one group, left to right.

    Each node's ``eval`` keeps its own outcome; an OPTIONAL still answers
    TRUE to its parent whatever its own outcome was.
    """
    results = []
    for child in node.children:
        value = eval_bgp_tree(child, group, match_mode, stats, pvs)
        results.append(value)
        if node.kind is NodeKind.GROUP and not value:
            node.eval = False
            return False

    if node.kind is NodeKind.UNION:
        node.eval = any(results)
    elif node.kind is NodeKind.EXISTS:
        node.eval = results[0]
    elif node.kind in (NodeKind.NOT_EXISTS, NodeKind.PREDICATE):
        node.eval = True
    elif node.kind is NodeKind.BGP:
        pv = pvs.get(node.bgp) if pvs is not None else None
        node.eval = is_match(node.bgp, group, match_mode, stats, pv)
    else:
        node.eval = results[-1] if results else True

    if node.kind is NodeKind.OPTIONAL:
        return True
    return node.eval


@dataclass
class CandidateReport:
    candidate_group_ids: List[int]
    per_group_pruned_tree: Dict[int, BgpTreeNode]
    filter_stats: FilterStats

    def to_dict(self, q: Query) -> dict:
        return {
            "candidates": list(self.candidate_group_ids),
            "stats": self.filter_stats.to_dict(),
            "queries": {
                str(gid): format_query(replace(q, root=tree)) for gid, tree in self.per_group_pruned_tree.items()
            },
        }


def _evaluate_group(q: Query, group: GroupRecord, match_mode: str, pvs) -> Tuple[bool, BgpTreeNode, FilterStats]:
    stats = FilterStats(groups_tested=1)
    tree = copy.deepcopy(q.root)
    tree.reset()
    ok = eval_bgp_tree(tree, group, match_mode, stats, pvs)
    return ok, tree, stats


def find_candidates(q: Query, index: PvIndex, match_mode: str = "homomorphic", workers: int = 1) -> CandidateReport:
    """Groups whose filters pass the whole tree, each with its pruned tree."""
    pvs = {bgp: pv_of_bgp(bgp) for bgp in q.bgps()}
    groups = index.groups
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda g: _evaluate_group(q, g, match_mode, pvs), groups))
    else:
        outcomes = [_evaluate_group(q, g, match_mode, pvs) for g in groups]

    stats = FilterStats()
    candidates, pruned = [], {}
    for group, (ok, tree, group_stats) in zip(groups, outcomes):
        stats.merge(group_stats)
        if ok:
            candidates.append(group.group_id)
            pruned[group.group_id] = rewrite_query(q, tree).root
    logger.debug("%d of %d groups are candidates", len(candidates), len(groups))
    return CandidateReport(candidates, pruned, stats)


# ------------------------
# Rewriting
# ------------------------
def _merge_bgps(children: List[BgpTreeNode]) -> List[BgpTreeNode]:
    merged: List[BgpTreeNode] = []
    for child in children:
        if child.kind is NodeKind.BGP and merged and merged[-1].kind is NodeKind.BGP:
            merged[-1] = BgpTreeNode(
                NodeKind.BGP, bgp=tuple(dict.fromkeys(merged[-1].bgp + child.bgp)), eval=merged[-1].eval and child.eval
            )
        else:
            merged.append(child)
    return merged


def _prune(group: BgpTreeNode) -> BgpTreeNode:
    children = []
    for child in group.children:
        if child.kind is NodeKind.OPTIONAL:
            if not child.eval:
                continue
            child = BgpTreeNode(NodeKind.OPTIONAL, [_prune(child.children[0])], eval=True)
        elif child.kind is NodeKind.UNION:
            branches = [_prune(branch) for branch in child.children if branch.eval]
            if not branches:
                raise DegenerateQuery("every UNION branch was pruned from a mandatory group")
            child = BgpTreeNode(NodeKind.UNION, branches, eval=True)
        else:
            child = copy.deepcopy(child)
        children.append(child)
    return BgpTreeNode(NodeKind.GROUP, _merge_bgps(children), eval=group.eval)


def rewrite_query(q: Query, tree: BgpTreeNode) -> Query:
    """Drop the OPTIONAL blocks and UNION branches that failed on this group.

    FILTERs and result modifiers are kept; a UNION left with one branch
    stays a nested group.
    """
    if not tree.eval:
        raise DegenerateQuery("the query cannot match in this group")
    return replace(q, root=_prune(tree), text="")


# ------------------------
# Per-graph Execution
# ------------------------
class GraphIndex:
    """Triples of one graph keyed by every combination of bound positions."""

    def __init__(self, triples: Sequence[Triple]):
        self._keys: Dict[Tuple[bool, bool, bool], Dict[tuple, List[Triple]]] = {}
        for mask in ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1), (1, 0, 1)):
            table: Dict[tuple, List[Triple]] = {}
            for t in triples:
                table.setdefault(tuple(x for x, keep in zip(t, mask) if keep), []).append(t)
            self._keys[tuple(bool(m) for m in mask)] = table
        self._all = list(triples)
        self._set = set(triples)

    def match(self, s: Optional[Term], p: Optional[Term], o: Optional[Term]) -> List[Triple]:
        bound = (s is not None, p is not None, o is not None)
        if bound == (False, False, False):
            return self._all
        if bound == (True, True, True):
            return [(s, p, o)] if (s, p, o) in self._set else []
        key = tuple(x for x in (s, p, o) if x is not None)
        return self._keys[bound].get(key, [])

    def count(self, s, p, o) -> int:
        return len(self.match(s, p, o))


def _resolve(node, mu: Solution) -> Optional[Term]:
    if isinstance(node, Variable):
        return mu.get(node.name)
    return node


def _bind(tp: TriplePattern, triple: Triple, mu: Solution) -> Optional[Solution]:
    extended = None
    for node, term in zip(tp, triple):
        if not isinstance(node, Variable):
            continue
        current = mu.get(node.name) if extended is None else extended.get(node.name)
        if current is None:
            if extended is None:
                extended = dict(mu)
            extended[node.name] = term
        elif current != term:
            return None
    return extended if extended is not None else dict(mu)


def match_bgp(patterns: Sequence[TriplePattern], graph: GraphIndex, mu: Optional[Solution] = None) -> Iterator[Solution]:
    """Backtracking join; the pattern with the fewest matches under the current bindings goes next."""
    mu = mu if mu is not None else {}
    if not patterns:
        yield mu
        return
    best, best_matches = 0, None
    for i, tp in enumerate(patterns):
        matches = graph.match(*(_resolve(node, mu) for node in tp))
        if best_matches is None or len(matches) < len(best_matches):
            best, best_matches = i, matches
            if not matches:
                return
    rest = patterns[:best] + patterns[best + 1:]
    tp = patterns[best]
    for triple in best_matches:
        extended = _bind(tp, triple, mu)
        if extended is not None:
            yield from match_bgp(rest, graph, extended)


def _compatible(a: Solution, b: Solution) -> bool:
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    return all(large.get(k, v) == v for k, v in small.items())


def _join(left: List[Solution], right: List[Solution]) -> List[Solution]:
    return [{**a, **b} for a in left for b in right if _compatible(a, b)]


# ------------------------
# Expressions
# ------------------------
class _ExprError(Exception):
    pass


_NUMERIC_TYPES = frozenset(
    str(t)
    for t in (
        XSD.integer, XSD.decimal, XSD.float, XSD.double, XSD.int, XSD.long, XSD.short, XSD.byte,
        XSD.nonNegativeInteger, XSD.positiveInteger, XSD.negativeInteger, XSD.nonPositiveInteger,
        XSD.unsignedLong, XSD.unsignedInt, XSD.unsignedShort, XSD.unsignedByte,
    )
)
_STRING_TYPES = frozenset([None, str(XSD.string)])
_BOOLEAN = str(XSD.boolean)
SUPPORTED_CALLS = {"regex": (2, 3), "bound": (1, 1)}


def _numeric(term: Term):
    value = Literal(term.lexical, datatype=URIRef(term.datatype)).toPython()
    if isinstance(value, Literal) or isinstance(value, bool):
        raise _ExprError(f"ill-typed numeric literal {term.n3()}")
    return value


def _is_numeric(term: Term) -> bool:
    return term.is_literal and term.datatype in _NUMERIC_TYPES


def _is_plain_string(term: Term) -> bool:
    return term.is_literal and term.language is None and term.datatype in _STRING_TYPES


def _ebv(value) -> bool:
    """Effective boolean value."""
    if isinstance(value, bool):
        return value
    if not isinstance(value, Term) or not value.is_literal:
        raise _ExprError("no effective boolean value")
    if value.datatype == _BOOLEAN:
        if value.lexical not in ("true", "false", "1", "0"):
            raise _ExprError("ill-typed boolean")
        return value.lexical in ("true", "1")
    if _is_numeric(value):
        number = _numeric(value)
        return bool(number) and number == number
    if value.datatype in _STRING_TYPES:
        return len(value.lexical) > 0
    raise _ExprError("no effective boolean value")


def _compare(op: str, a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        a, b = _ebv(a), _ebv(b)
    elif _is_numeric(a) and _is_numeric(b):
        a, b = _numeric(a), _numeric(b)
    elif _is_plain_string(a) and _is_plain_string(b):
        a, b = a.lexical, b.lexical
    elif a.is_literal and b.is_literal and a.datatype == _BOOLEAN == b.datatype:
        a, b = _ebv(a), _ebv(b)
    elif op in ("=", "!="):
        return (a == b) == (op == "=")
    else:
        raise _ExprError(f"cannot order {a} and {b}")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _evaluate(expr: Expr, mu: Solution):
    if isinstance(expr, VarExpr):
        if expr.name not in mu:
            raise _ExprError(f"?{expr.name} is unbound")
        return mu[expr.name]
    if isinstance(expr, TermExpr):
        return expr.term
    if isinstance(expr, NotExpr):
        return not _ebv(_evaluate(expr.operand, mu))
    if isinstance(expr, BinaryExpr):
        if expr.op in ("&&", "||"):
            return _logical(expr, mu)
        return _compare(expr.op, _evaluate(expr.left, mu), _evaluate(expr.right, mu))
    if expr.name == "bound":
        return expr.args[0].name in mu
    text = _evaluate(expr.args[0], mu)
    pattern = _evaluate(expr.args[1], mu)
    flags = _evaluate(expr.args[2], mu) if len(expr.args) == 3 else Term.literal("")
    if not all(isinstance(arg, Term) and arg.is_literal for arg in (text, pattern, flags)):
        raise _ExprError("regex needs literal arguments")
    re_flags = re.IGNORECASE if "i" in flags.lexical else 0
    re_flags |= re.DOTALL if "s" in flags.lexical else 0
    re_flags |= re.MULTILINE if "m" in flags.lexical else 0
    try:
        return re.search(pattern.lexical, text.lexical, re_flags) is not None
    except re.error as e:
        raise _ExprError(f"bad regex: {e}")


def _logical(expr: BinaryExpr, mu: Solution) -> bool:
    """SPARQL three-valued logic: an error survives only when the other side cannot decide."""
    sides = []
    for operand in (expr.left, expr.right):
        try:
            sides.append(_ebv(_evaluate(operand, mu)))
        except _ExprError:
            sides.append(None)
    decisive = expr.op == "||"
    if decisive in sides:
        return decisive
    if None in sides:
        raise _ExprError("error operand")
    return not decisive


def _validate_expr(expr: Expr) -> None:
    if isinstance(expr, CallExpr):
        if expr.name not in SUPPORTED_CALLS:
            raise UnsupportedExpression(f"function {expr.name}() is not supported")
        low, high = SUPPORTED_CALLS[expr.name]
        if not low <= len(expr.args) <= high:
            raise UnsupportedExpression(f"{expr.name}() takes {low} to {high} arguments, got {len(expr.args)}")
        if expr.name == "bound" and not isinstance(expr.args[0], VarExpr):
            raise UnsupportedExpression("bound() takes a variable")
        for arg in expr.args:
            _validate_expr(arg)
    elif isinstance(expr, BinaryExpr):
        _validate_expr(expr.left)
        _validate_expr(expr.right)
    elif isinstance(expr, NotExpr):
        _validate_expr(expr.operand)


def validate_query(q: Query) -> None:
    """Raise UnsupportedExpression for FILTER forms the executor cannot evaluate."""
    for node in q.root.walk():
        if node.predicate_expr is not None:
            _validate_expr(node.predicate_expr)


# ------------------------
# Algebra
# ------------------------
class _GraphEvaluator:
    def __init__(self, triples: Sequence[Triple]):
        self.graph = GraphIndex(triples)

    def constraint_holds(self, constraint: BgpTreeNode, mu: Solution) -> bool:
        if constraint.kind is NodeKind.PREDICATE:
            try:
                return _ebv(_evaluate(constraint.predicate_expr, mu))
            except _ExprError:
                return False
        exists = next(match_bgp(list(constraint.children[0].bgp), self.graph, dict(mu)), None) is not None
        return exists if constraint.kind is NodeKind.EXISTS else not exists

    def group(self, node: BgpTreeNode, with_filters: bool = True) -> List[Solution]:
        solutions: List[Solution] = [{}]
        constraints = []
        for child in node.children:
            if child.kind is NodeKind.BGP:
                patterns = list(child.bgp)
                solutions = [s for mu in solutions for s in match_bgp(patterns, self.graph, mu)]
            elif child.kind is NodeKind.UNION:
                right = [s for branch in child.children for s in self.group(branch)]
                solutions = _join(solutions, right)
            elif child.kind is NodeKind.OPTIONAL:
                solutions = self.left_join(solutions, child.children[0])
            elif child.kind is NodeKind.FILTER:
                constraints.append(child.children[0])
        if with_filters and constraints:
            solutions = [mu for mu in solutions if all(self.constraint_holds(c, mu) for c in constraints)]
        return solutions

    def left_join(self, left: List[Solution], optional: BgpTreeNode) -> List[Solution]:
        """FILTERs at the top of the OPTIONAL group are the join condition."""
        right = self.group(optional, with_filters=False)
        conditions = [c.children[0] for c in optional.children if c.kind is NodeKind.FILTER]
        out = []
        for a in left:
            matched = False
            for b in right:
                if not _compatible(a, b):
                    continue
                merged = {**a, **b}
                if all(self.constraint_holds(c, merged) for c in conditions):
                    out.append(merged)
                    matched = True
            if not matched:
                out.append(a)
        return out


# ------------------------
# Binding Tables
# ------------------------
@dataclass
class BindingTable:
    columns: List[str]
    rows: List[Row] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def as_bag(self) -> Counter:
        return Counter(self.rows)

    def records(self) -> List[Dict[str, Optional[str]]]:
        return [
            {col: (term.n3() if term is not None else None) for col, term in zip(self.columns, row)}
            for row in self.rows
        ]


def execute_on_group(q: Query, store: GraphStore, columns: Optional[List[str]] = None) -> BindingTable:
    """Evaluate the GRAPH block on every graph of ``store`` separately.

    Rows follow the store's graph order; result modifiers are not applied.
    """
    validate_query(q)
    columns = columns if columns is not None else q.columns()
    table = BindingTable(list(columns))
    for ctx in store.contexts:
        evaluator = _GraphEvaluator(store.graphs[ctx])
        for mu in evaluator.group(q.root):
            if mu.get(q.graph_var, ctx) != ctx:
                continue
            mu = {**mu, q.graph_var: ctx}
            table.rows.append(tuple(mu.get(col) for col in columns))
    return table


def apply_modifiers(table: BindingTable, modifiers: ResultModifiers) -> BindingTable:
    rows = table.rows
    if modifiers.distinct:
        rows = list(dict.fromkeys(rows))
    start = modifiers.offset or 0
    stop = start + modifiers.limit if modifiers.limit is not None else None
    return BindingTable(table.columns, rows[start:stop])


def answer_query(
    q: Query,
    index: PvIndex,
    match_mode: str = "homomorphic",
    workers: int = 1,
    candidates: Optional[CandidateReport] = None,
) -> BindingTable:
    """Filter, rewrite per candidate, execute, concatenate in group order, then apply modifiers."""
    validate_query(q)
    report = candidates if candidates is not None else find_candidates(q, index, match_mode, workers)
    columns = q.columns()

    def run(group_id: int) -> BindingTable:
        rewritten = replace(q, root=report.per_group_pruned_tree[group_id])
        return execute_on_group(rewritten, index.group_store(group_id), columns)

    ids = report.candidate_group_ids
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, ids))
    else:
        parts = [run(gid) for gid in ids]

    merged = BindingTable(columns, [row for part in parts for row in part.rows])
    return apply_modifiers(merged, q.modifiers)


def brute_force(q: Query, store: GraphStore) -> BindingTable:
    """Evaluate the unrewritten query over every graph, ignoring any index."""
    return apply_modifiers(execute_on_group(q, store), q.modifiers)


# ------------------------
# Output
# ------------------------
def binding_table_frame(table: BindingTable) -> pd.DataFrame:
    return pd.DataFrame.from_records(table.records(), columns=table.columns)


def write_tsv(table: BindingTable, out: TextIO) -> None:
    """Header of ``?name`` columns; terms in N-Triples form, ``NULL`` when unbound."""
    out.write("\t".join(f"?{col}" for col in table.columns) + "\n")
    for row in table.rows:
        out.write("\t".join(term.n3() if term is not None else "NULL" for term in row) + "\n")


def write_json(table: BindingTable, out: TextIO) -> None:
    frame = binding_table_frame(table)
    records = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
    json.dump({"columns": table.columns, "rows": records}, out, ensure_ascii=False)
    out.write("\n")
