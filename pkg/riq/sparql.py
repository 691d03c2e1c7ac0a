import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple, Union

from rdflib.namespace import RDF, XSD

from riq.errors import SparqlSyntaxError
from riq.pattern_vectors import Node, TriplePattern, Variable
from riq.rdf_core import Term, unescape


# ------------------------
# Expressions
# ------------------------
@dataclass(frozen=True)
class VarExpr:
    name: str


@dataclass(frozen=True)
class TermExpr:
    term: Term


@dataclass(frozen=True)
class BinaryExpr:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class NotExpr:
    operand: "Expr"


@dataclass(frozen=True)
class CallExpr:
    """A builtin call; the name is lower-cased. Only regex and bound evaluate."""

    name: str
    args: Tuple["Expr", ...]


Expr = Union[VarExpr, TermExpr, BinaryExpr, NotExpr, CallExpr]

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
LOGICAL_OPS = ("&&", "||")


def expression_variables(expr: Expr) -> List[str]:
    if isinstance(expr, VarExpr):
        return [expr.name]
    if isinstance(expr, BinaryExpr):
        return expression_variables(expr.left) + expression_variables(expr.right)
    if isinstance(expr, NotExpr):
        return expression_variables(expr.operand)
    if isinstance(expr, CallExpr):
        return [name for arg in expr.args for name in expression_variables(arg)]
    return []


def format_expr(expr: Expr) -> str:
    if isinstance(expr, VarExpr):
        return f"?{expr.name}"
    if isinstance(expr, TermExpr):
        return expr.term.n3()
    if isinstance(expr, BinaryExpr):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    if isinstance(expr, NotExpr):
        return f"!{format_expr(expr.operand)}"
    return f"{expr.name}({', '.join(format_expr(arg) for arg in expr.args)})"


# ------------------------
# BGP Tree
# ------------------------
class NodeKind(Enum):
    GROUP = "GroupGraphPattern"
    UNION = "GroupOrUnionGraphPattern"
    OPTIONAL = "OptionalGraphPattern"
    FILTER = "Filter"
    PREDICATE = "Predicate"
    EXISTS = "Exists"
    NOT_EXISTS = "NotExists"
    BGP = "BGP"


@dataclass
class BgpTreeNode:
    """One node of the parse tree of a GRAPH block.

    ``eval`` is working state for candidate filtering and takes no part in
    equality.
    """

    kind: NodeKind
    children: List["BgpTreeNode"] = field(default_factory=list)
    bgp: Tuple[TriplePattern, ...] = ()
    predicate_expr: Optional[Expr] = None
    eval: bool = field(default=False, compare=False)

    def walk(self) -> Iterator["BgpTreeNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def reset(self) -> None:
        for node in self.walk():
            node.eval = False

    def variables(self) -> List[str]:
        """Variable names in order of first appearance, blank-node variables excluded."""
        seen: Dict[str, None] = {}
        for node in self.walk():
            for tp in node.bgp:
                for var in tp:
                    if isinstance(var, Variable) and not var.is_blank:
                        seen.setdefault(var.name, None)
            if node.predicate_expr is not None:
                for name in expression_variables(node.predicate_expr):
                    seen.setdefault(name, None)
        return list(seen)

    def __repr__(self) -> str:
        if self.kind is NodeKind.BGP:
            return f"BGP[{' . '.join(str(tp) for tp in self.bgp)}]"
        if self.kind is NodeKind.PREDICATE:
            return f"Predicate[{format_expr(self.predicate_expr)}]"
        return f"{self.kind.value}{self.children!r}"


def bgp_node(patterns) -> BgpTreeNode:
    """A BGP leaf; duplicate triple patterns are dropped, first occurrence kept."""
    return BgpTreeNode(NodeKind.BGP, bgp=tuple(dict.fromkeys(patterns)))


@dataclass
class ResultModifiers:
    distinct: bool = False
    limit: Optional[int] = None
    offset: Optional[int] = None


@dataclass
class Query:
    """A parsed query. ``select_vars`` is None for ``SELECT *``.

    Prefixed names are expanded at parse time, so ``prefixes`` and the
    source text do not take part in equality.
    """

    select_vars: Optional[Tuple[str, ...]]
    graph_var: str
    root: BgpTreeNode
    modifiers: ResultModifiers = field(default_factory=ResultModifiers)
    prefixes: Dict[str, str] = field(default_factory=dict, compare=False)
    text: str = field(default="", compare=False, repr=False)

    def variables(self) -> List[str]:
        """Graph variable first, then every pattern variable by first appearance."""
        names = [self.graph_var]
        names.extend(v for v in self.root.variables() if v != self.graph_var)
        return names

    def columns(self) -> List[str]:
        """Result columns; the graph variable is appended when the SELECT list omits it."""
        if self.select_vars is None:
            return self.variables()
        columns = list(self.select_vars)
        if self.graph_var not in columns:
            columns.append(self.graph_var)
        return columns

    def bgps(self) -> List[Tuple[TriplePattern, ...]]:
        return [node.bgp for node in self.root.walk() if node.kind is NodeKind.BGP]


# ------------------------
# Tokenizer
# ------------------------
_PN_CHARS = r"A-Za-z0-9_\u00B7\u00C0-\uFFFF"
_PN_LOCAL = r"(?:[" + _PN_CHARS + r"](?:[" + _PN_CHARS + r"\-.]*[" + _PN_CHARS + r"\-])?)?"
_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("IRI", r"<(?:[^<>\"{}|^`\\\x00-\x20]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*>"),
    ("VAR", r"[?$][" + _PN_CHARS + r"]+"),
    ("STRING", r'"(?:[^"\\\n\r]|\\.)*"|\'(?:[^\'\\\n\r]|\\.)*\''),
    ("LANGTAG", r"@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*"),
    ("DTYPE", r"\^\^"),
    ("NUMBER", r"[+-]?(?:\d+\.\d*[eE][+-]?\d+|\.?\d+[eE][+-]?\d+|\d*\.\d+|\d+)"),
    ("BLANK", r"_:" + _PN_LOCAL),
    ("PNAME", r"(?:[A-Za-z\u00C0-\uFFFF][" + _PN_CHARS + r"\-]*)?:" + _PN_LOCAL),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("OP", r"&&|\|\||!=|<=|>=|[=<>!]"),
    ("PUNCT", r"[{}().,;*]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))
_OP_RE = re.compile(dict(_TOKEN_SPEC)["OP"])
# `<` glued to a variable or an operator, as in `?a<?b&&?c>?d`, is a comparison
_COMPARISON_NOT_IRI = re.compile(r"<(?:[=?$]|[^>]*&&)")

KEYWORDS = frozenset(
    ["PREFIX", "SELECT", "DISTINCT", "WHERE", "GRAPH", "OPTIONAL", "UNION", "FILTER", "EXISTS", "NOT", "LIMIT", "OFFSET"]
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    def describe(self) -> str:
        return "end of input" if self.kind == "EOF" else repr(self.text)


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise SparqlSyntaxError(line, pos - line_start + 1, "a token", repr(text[pos]), text)
        kind = match.lastgroup
        if kind == "IRI" and _COMPARISON_NOT_IRI.match(match.group()):
            match, kind = _OP_RE.match(text, pos), "OP"
        if kind not in ("WS", "COMMENT"):
            tokens.append(Token(kind, match.group(), line, pos - line_start + 1))
        newlines = match.group().count("\n")
        if newlines:
            line += newlines
            line_start = match.start() + match.group().rindex("\n") + 1
        pos = match.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


# ------------------------
# Parser
# ------------------------
_TERM_STARTS = ("VAR", "IRI", "PNAME", "STRING", "NUMBER", "BLANK")


class SparqlParser:
    """Recursive-descent parser for the supported query subset.

    ``productions`` counts every grammar production the parse went through.
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.prefixes: Dict[str, str] = {}
        self.productions: Counter = Counter()

    # -- token helpers

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _error(self, expected: str) -> SparqlSyntaxError:
        tok = self.current
        return SparqlSyntaxError(tok.line, tok.col, expected, tok.describe(), self.text)

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def _is_keyword(self, word: str) -> bool:
        tok = self.current
        return tok.kind == "NAME" and tok.text.upper() == word

    def _is_punct(self, char: str) -> bool:
        tok = self.current
        return tok.kind == "PUNCT" and tok.text == char

    def _accept_keyword(self, word: str) -> bool:
        if self._is_keyword(word):
            self._advance()
            return True
        return False

    def _accept_punct(self, char: str) -> bool:
        if self._is_punct(char):
            self._advance()
            return True
        return False

    def _expect_keyword(self, word: str) -> None:
        if not self._accept_keyword(word):
            raise self._error(word)

    def _expect_punct(self, char: str) -> None:
        if not self._accept_punct(char):
            raise self._error(f"'{char}'")

    def _expect_var(self) -> str:
        if self.current.kind != "VAR":
            raise self._error("a variable")
        return self._advance().text[1:]

    # -- query

    def parse(self) -> Query:
        self.productions["Query"] += 1
        while self._accept_keyword("PREFIX"):
            self._prefix_decl()

        self._expect_keyword("SELECT")
        distinct = self._accept_keyword("DISTINCT")
        if self._accept_punct("*"):
            select_vars = None
        else:
            names = []
            while self.current.kind == "VAR":
                names.append(self._advance().text[1:])
            if not names:
                raise self._error("a variable or '*'")
            select_vars = tuple(dict.fromkeys(names))

        self._expect_keyword("WHERE")
        self._expect_punct("{")
        self._expect_keyword("GRAPH")
        graph_var = self._expect_var()
        self._expect_punct("{")
        root = self._group_graph_pattern()
        self._expect_punct("}")
        self._expect_punct("}")
        modifiers = self._result_modifiers(distinct)
        if self.current.kind != "EOF":
            raise self._error("end of input")
        return Query(select_vars, graph_var, root, modifiers, dict(self.prefixes), self.text)

    def _prefix_decl(self) -> None:
        tok = self.current
        if tok.kind != "PNAME" or not tok.text.endswith(":"):
            raise self._error("a prefix name such as 'ex:'")
        self._advance()
        if self.current.kind != "IRI":
            raise self._error("an IRI")
        self.prefixes[tok.text[:-1]] = unescape(self._advance().text[1:-1])

    def _result_modifiers(self, distinct: bool) -> ResultModifiers:
        self.productions["ResultModifiers"] += 1
        modifiers = ResultModifiers(distinct=distinct)
        while True:
            if self._is_keyword("LIMIT") and modifiers.limit is None:
                self._advance()
                modifiers.limit = self._count()
            elif self._is_keyword("OFFSET") and modifiers.offset is None:
                self._advance()
                modifiers.offset = self._count()
            else:
                return modifiers

    def _count(self) -> int:
        tok = self.current
        if tok.kind != "NUMBER" or not tok.text.isdigit():
            raise self._error("a non-negative integer")
        self._advance()
        return int(tok.text)

    # -- graph patterns

    def _group_graph_pattern(self) -> BgpTreeNode:
        """BGP? ( GraphPatternNotTriples '.'? BGP? )*, up to the closing brace."""
        self.productions["GroupGraphPattern"] += 1
        node = BgpTreeNode(NodeKind.GROUP)
        patterns = self._triples_block()
        if patterns:
            node.children.append(self._bgp(patterns))
        while not self._is_punct("}"):
            node.children.append(self._graph_pattern_not_triples())
            self._accept_punct(".")
            patterns = self._triples_block()
            if patterns:
                node.children.append(self._bgp(patterns))
        return node

    def _bgp(self, patterns: List[TriplePattern]) -> BgpTreeNode:
        self.productions["BGP"] += 1
        return bgp_node(patterns)

    def _graph_pattern_not_triples(self) -> BgpTreeNode:
        if self._is_punct("{"):
            node = self._group_or_union()
        elif self._is_keyword("OPTIONAL"):
            node = self._optional()
        elif self._is_keyword("FILTER"):
            node = self._filter()
        else:
            raise self._error("a triple pattern, '{', OPTIONAL, FILTER or '}'")
        self.productions["GraphPatternNotTriples"] += 1
        return node

    def _nested_group(self) -> BgpTreeNode:
        self._expect_punct("{")
        group = self._group_graph_pattern()
        self._expect_punct("}")
        return group

    def _group_or_union(self) -> BgpTreeNode:
        self.productions["GroupOrUnionGraphPattern"] += 1
        node = BgpTreeNode(NodeKind.UNION, children=[self._nested_group()])
        while self._accept_keyword("UNION"):
            self.productions["Union"] += 1
            node.children.append(self._nested_group())
        return node

    def _optional(self) -> BgpTreeNode:
        self._expect_keyword("OPTIONAL")
        self.productions["OptionalGraphPattern"] += 1
        return BgpTreeNode(NodeKind.OPTIONAL, children=[self._nested_group()])

    def _filter(self) -> BgpTreeNode:
        self._expect_keyword("FILTER")
        self.productions["Filter"] += 1
        self.productions["Constraint"] += 1
        if self._accept_keyword("NOT"):
            self._expect_keyword("EXISTS")
            self.productions["NotExists"] += 1
            constraint = BgpTreeNode(NodeKind.NOT_EXISTS, children=[self._exists_block()])
        elif self._accept_keyword("EXISTS"):
            self.productions["Exists"] += 1
            constraint = BgpTreeNode(NodeKind.EXISTS, children=[self._exists_block()])
        elif self._is_punct("("):
            constraint = self._predicate(self._bracketted())
        elif self.current.kind == "NAME":
            constraint = self._predicate(self._call())
        else:
            raise self._error("'(', a builtin call, EXISTS or NOT EXISTS")
        return BgpTreeNode(NodeKind.FILTER, children=[constraint])

    def _predicate(self, expr: Expr) -> BgpTreeNode:
        self.productions["Predicate"] += 1
        return BgpTreeNode(NodeKind.PREDICATE, predicate_expr=expr)

    def _exists_block(self) -> BgpTreeNode:
        self._expect_punct("{")
        patterns = self._triples_block()
        self._expect_punct("}")
        return self._bgp(patterns)

    # -- triples

    def _triples_block(self) -> List[TriplePattern]:
        patterns: List[TriplePattern] = []
        while self.current.kind in _TERM_STARTS:
            subject = self._node()
            self._property_list(subject, patterns)
            self.productions["TriplesSameSubject"] += 1
            if not self._accept_punct("."):
                break
        return patterns

    def _property_list(self, subject: Node, patterns: List[TriplePattern]) -> None:
        while True:
            predicate = self._verb()
            while True:
                patterns.append(TriplePattern(subject, predicate, self._node()))
                if not self._accept_punct(","):
                    break
            if not self._accept_punct(";"):
                return
            if self.current.kind not in _TERM_STARTS and not self._is_keyword_a():
                return

    def _is_keyword_a(self) -> bool:
        tok = self.current
        return tok.kind == "NAME" and tok.text == "a"

    def _verb(self) -> Node:
        if self._is_keyword_a():
            self._advance()
            return Term.iri(str(RDF.type))
        tok = self.current
        if tok.kind not in ("VAR", "IRI", "PNAME"):
            raise self._error("a predicate (variable, IRI or 'a')")
        return self._node()

    def _node(self) -> Node:
        tok = self.current
        if tok.kind == "VAR":
            self._advance()
            return Variable(tok.text[1:])
        if tok.kind == "BLANK":
            self._advance()
            return Variable(tok.text)
        if tok.kind in ("IRI", "PNAME"):
            return Term.iri(self._iri())
        if tok.kind == "STRING":
            return self._string_literal()
        if tok.kind == "NUMBER":
            return self._number_literal()
        if tok.kind == "NAME" and tok.text.lower() in ("true", "false"):
            self._advance()
            return Term.literal(tok.text.lower(), datatype=str(XSD.boolean))
        raise self._error("an RDF term or variable")

    def _iri(self) -> str:
        tok = self._advance()
        if tok.kind == "IRI":
            return unescape(tok.text[1:-1])
        prefix, _, local = tok.text.partition(":")
        if prefix not in self.prefixes:
            self.pos -= 1
            raise self._error(f"a declared prefix (unknown prefix '{prefix}:')")
        return self.prefixes[prefix] + local

    def _string_literal(self) -> Term:
        lexical = unescape(self._advance().text[1:-1])
        if self.current.kind == "LANGTAG":
            return Term.literal(lexical, language=self._advance().text[1:])
        if self.current.kind == "DTYPE":
            self._advance()
            if self.current.kind not in ("IRI", "PNAME"):
                raise self._error("a datatype IRI")
            return Term.literal(lexical, datatype=self._iri())
        return Term.literal(lexical)

    def _number_literal(self) -> Term:
        text = self._advance().text
        if "e" in text or "E" in text:
            datatype = XSD.double
        elif "." in text:
            datatype = XSD.decimal
        else:
            datatype = XSD.integer
        return Term.literal(text, datatype=str(datatype))

    # -- expressions

    def _bracketted(self) -> Expr:
        self._expect_punct("(")
        expr = self._or_expr()
        self._expect_punct(")")
        return expr

    def _or_expr(self) -> Expr:
        expr = self._and_expr()
        while self.current.kind == "OP" and self.current.text == "||":
            self._advance()
            expr = BinaryExpr("||", expr, self._and_expr())
        return expr

    def _and_expr(self) -> Expr:
        expr = self._relational()
        while self.current.kind == "OP" and self.current.text == "&&":
            self._advance()
            expr = BinaryExpr("&&", expr, self._relational())
        return expr

    def _relational(self) -> Expr:
        expr = self._unary()
        if self.current.kind == "OP" and self.current.text in COMPARISON_OPS:
            op = self._advance().text
            expr = BinaryExpr(op, expr, self._unary())
        return expr

    def _unary(self) -> Expr:
        if self.current.kind == "OP" and self.current.text == "!":
            self._advance()
            return NotExpr(self._unary())
        return self._primary()

    def _primary(self) -> Expr:
        tok = self.current
        if self._is_punct("("):
            return self._bracketted()
        if tok.kind == "VAR":
            self._advance()
            return VarExpr(tok.text[1:])
        if tok.kind == "NAME" and tok.text.lower() not in ("true", "false"):
            return self._call()
        if tok.kind in ("IRI", "PNAME", "STRING", "NUMBER", "NAME"):
            return TermExpr(self._node())
        raise self._error("an expression")

    def _call(self) -> CallExpr:
        name = self._advance().text.lower()
        self._expect_punct("(")
        args = []
        if not self._is_punct(")"):
            args.append(self._or_expr())
            while self._accept_punct(","):
                args.append(self._or_expr())
        self._expect_punct(")")
        return CallExpr(name, tuple(args))


def parse_query(text: str) -> Query:
    return SparqlParser(text).parse()


# ------------------------
# Formatting
# ------------------------
_INDENT = "  "


def _format_node(node: BgpTreeNode, depth: int, out: List[str]) -> None:
    pad = _INDENT * depth
    if node.kind is NodeKind.BGP:
        out.extend(f"{pad}{tp} ." for tp in node.bgp)
    elif node.kind is NodeKind.UNION:
        for i, branch in enumerate(node.children):
            out.append(f"{pad}{'UNION ' if i else ''}{{")
            _format_children(branch, depth + 1, out)
            out.append(f"{pad}}}")
    elif node.kind is NodeKind.OPTIONAL:
        out.append(f"{pad}OPTIONAL {{")
        _format_children(node.children[0], depth + 1, out)
        out.append(f"{pad}}}")
    elif node.kind is NodeKind.FILTER:
        constraint = node.children[0]
        if constraint.kind is NodeKind.PREDICATE:
            expr = constraint.predicate_expr
            text = format_expr(expr)
            if not isinstance(expr, BinaryExpr):
                text = f"({text})"
            out.append(f"{pad}FILTER {text}")
        else:
            keyword = "EXISTS" if constraint.kind is NodeKind.EXISTS else "NOT EXISTS"
            out.append(f"{pad}FILTER {keyword} {{")
            _format_node(constraint.children[0], depth + 1, out)
            out.append(f"{pad}}}")
    else:
        _format_children(node, depth, out)


def _format_children(group: BgpTreeNode, depth: int, out: List[str]) -> None:
    for child in group.children:
        _format_node(child, depth, out)


def format_query(q: Query) -> str:
    """Render ``q`` back into the supported subset with every IRI written in full."""
    head = "SELECT "
    if q.modifiers.distinct:
        head += "DISTINCT "
    head += "*" if q.select_vars is None else " ".join(f"?{name}" for name in q.select_vars)
    lines = [f"{head} WHERE {{", f"{_INDENT}GRAPH ?{q.graph_var} {{"]
    _format_children(q.root, 2, lines)
    lines.append(f"{_INDENT}}}")
    lines.append("}")
    tail = []
    if q.modifiers.limit is not None:
        tail.append(f"LIMIT {q.modifiers.limit}")
    if q.modifiers.offset is not None:
        tail.append(f"OFFSET {q.modifiers.offset}")
    if tail:
        lines.append(" ".join(tail))
    return "\n".join(lines) + "\n"
