import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from riq.errors import MalformedLine

logger = logging.getLogger(__name__)


# ------------------------
# Terms and Quads
# ------------------------
class TermKind(Enum):
    IRI = "iri"
    LITERAL = "literal"
    BLANK = "blank"


@dataclass(frozen=True)
class Term:
    """An RDF term. Equality is exact field equality after unescaping."""

    kind: TermKind
    lexical: str
    datatype: Optional[str] = None
    language: Optional[str] = None

    def __post_init__(self):
        if self.kind is TermKind.LITERAL:
            if self.datatype is not None and self.language is not None:
                raise ValueError("a literal carries a datatype or a language tag, not both")
            return
        if not self.lexical:
            raise ValueError(f"{self.kind.value} term needs a non-empty lexical form")
        if self.datatype is not None or self.language is not None:
            raise ValueError(f"{self.kind.value} term cannot carry a datatype or language tag")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(TermKind.IRI, value)

    @classmethod
    def literal(cls, value: str, datatype: Optional[str] = None, language: Optional[str] = None) -> "Term":
        return cls(TermKind.LITERAL, value, datatype, language)

    @classmethod
    def blank(cls, label: str) -> "Term":
        return cls(TermKind.BLANK, label)

    @property
    def is_iri(self) -> bool:
        return self.kind is TermKind.IRI

    @property
    def is_literal(self) -> bool:
        return self.kind is TermKind.LITERAL

    @property
    def is_blank(self) -> bool:
        return self.kind is TermKind.BLANK

    def n3(self) -> str:
        """Canonical N-Quads text for this term."""
        if self.kind is TermKind.IRI:
            return f"<{_escape_iri(self.lexical)}>"
        if self.kind is TermKind.BLANK:
            return f"_:{self.lexical}"
        text = f'"{_escape_string(self.lexical)}"'
        if self.datatype is not None:
            return f"{text}^^<{_escape_iri(self.datatype)}>"
        if self.language is not None:
            return f"{text}@{self.language}"
        return text

    def __str__(self) -> str:
        return self.n3()


Triple = Tuple[Term, Term, Term]


@dataclass(frozen=True)
class Quad:
    subject: Term
    predicate: Term
    object: Term
    context: Term

    def __post_init__(self):
        if not self.predicate.is_iri:
            raise ValueError(f"predicate must be an IRI, got {self.predicate}")
        if self.subject.is_literal:
            raise ValueError(f"subject cannot be a literal, got {self.subject}")
        if self.context.is_literal:
            raise ValueError(f"context cannot be a literal, got {self.context}")

    @property
    def triple(self) -> Triple:
        return (self.subject, self.predicate, self.object)

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} {self.context.n3()} ."


# ------------------------
# Escaping
# ------------------------
_ECHAR_DECODE = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_STRING_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r"}
_IRI_FORBIDDEN = set('<>"{}|^`\\')

_UCHAR = r"\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8}"
_ESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|([tbnrf\"'\\]))")


def unescape(text: str) -> str:
    if "\\" not in text:
        return text

    def replace(match):
        short, long_, echar = match.groups()
        if echar is not None:
            return _ECHAR_DECODE[echar]
        return chr(int(short or long_, 16))

    return _ESCAPE_RE.sub(replace, text)


def _uchar(ch: str) -> str:
    code = ord(ch)
    return f"\\u{code:04X}" if code <= 0xFFFF else f"\\U{code:08X}"


def _escape_string(text: str) -> str:
    out = []
    for ch in text:
        if ch in _STRING_ESCAPES:
            out.append(_STRING_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(_uchar(ch))
        else:
            out.append(ch)
    return "".join(out)


def _escape_iri(text: str) -> str:
    if all(ord(ch) > 0x20 and ch not in _IRI_FORBIDDEN for ch in text):
        return text
    return "".join(_uchar(ch) if ord(ch) <= 0x20 or ch in _IRI_FORBIDDEN else ch for ch in text)


# ------------------------
# N-Quads Parsing
# ------------------------
_IRI_BODY = r'(?:[^\x00-\x20<>"{}|^`\\]|' + _UCHAR + r")*"
_PN = r"A-Za-z0-9_\u00B7\u00C0-\uFFFF"
_TOKEN_RE = re.compile(
    r"[ \t]*(?:"
    r"<(?P<iri>" + _IRI_BODY + r")>"
    r"|_:(?P<blank>[" + _PN + r"](?:[" + _PN + r"\-.]*[" + _PN + r"\-])?)"
    r'|"(?P<string>(?:[^"\\\n\r]|\\[tbnrf"\'\\]|' + _UCHAR + r')*)"'
    r"(?:\^\^<(?P<datatype>" + _IRI_BODY + r")>|@(?P<lang>[a-zA-Z]+(?:-[a-zA-Z0-9]+)*))?"
    r"|(?P<dot>\.)"
    r"|(?P<comment>#.*)"
    r")"
)


def _tokenize(line: str, line_no: int) -> List[Term]:
    terms: List[Term] = []
    pos, end = 0, len(line)
    closed = False
    while pos < end:
        if line[pos] in " \t":
            pos += 1
            continue
        match = _TOKEN_RE.match(line, pos)
        if match is None or match.end() == pos:
            raise MalformedLine(line_no, f"unexpected character {line[pos]!r} at column {pos + 1}")
        pos = match.end()
        if match.group("comment") is not None:
            break
        if closed:
            raise MalformedLine(line_no, f"content after statement terminator at column {match.start() + 1}")
        if match.group("dot") is not None:
            closed = True
        elif match.group("iri") is not None:
            terms.append(Term.iri(unescape(match.group("iri"))))
        elif match.group("blank") is not None:
            terms.append(Term.blank(match.group("blank")))
        else:
            datatype = match.group("datatype")
            terms.append(
                Term.literal(
                    unescape(match.group("string")),
                    datatype=unescape(datatype) if datatype is not None else None,
                    language=match.group("lang"),
                )
            )
    if terms and not closed:
        raise MalformedLine(line_no, "missing ' .' terminator")
    if closed and not terms:
        raise MalformedLine(line_no, "empty statement")
    return terms


def parse_term(text: str) -> Term:
    """Parse a single N-Quads term such as ``<http://x>`` or ``"v"@en``."""
    terms = _tokenize(text.strip() + " .", 0)
    if len(terms) != 1:
        raise MalformedLine(0, f"expected one term, found {len(terms)} in {text!r}")
    return terms[0]


def _build_quad(terms: List[Term], line_no: int, default_graph: Optional[Term]) -> Quad:
    if len(terms) == 3:
        if default_graph is None:
            raise MalformedLine(line_no, "statement has no graph label and no default graph is configured")
        terms = terms + [default_graph]
    if len(terms) != 4:
        raise MalformedLine(line_no, f"expected 3 or 4 terms, found {len(terms)}")
    subject, predicate, obj, context = terms
    if subject.is_literal:
        raise MalformedLine(line_no, "subject is a literal")
    if not predicate.is_iri:
        raise MalformedLine(line_no, "predicate is not an IRI")
    if context.is_literal:
        raise MalformedLine(line_no, "graph label is a literal")
    return Quad(subject, predicate, obj, context)


@dataclass
class ParseReport:
    """Counters and diagnostics collected while parsing leniently."""

    quads: int = 0
    malformed: List[MalformedLine] = field(default_factory=list)


def parse_nquads(
    lines: Union[BinaryIO, Iterable[Union[bytes, str]]],
    strict: bool = False,
    default_graph: Optional[str] = None,
    report: Optional[ParseReport] = None,
) -> Iterator[Quad]:
    """Yield one Quad per well-formed N-Quads statement.

    Lenient mode logs and skips malformed lines; strict mode raises the
    first MalformedLine. Triples-only lines take ``default_graph`` as their
    context when one is given.
    """
    default_term = Term.iri(default_graph) if default_graph is not None else None
    report = report if report is not None else ParseReport()

    for line_no, raw in enumerate(lines, start=1):
        try:
            text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
        except UnicodeDecodeError as e:
            error = MalformedLine(line_no, f"invalid UTF-8: {e.reason}")
        else:
            text = text.rstrip("\r\n")
            try:
                terms = _tokenize(text, line_no)
                if not terms:
                    continue
                quad = _build_quad(terms, line_no, default_term)
            except MalformedLine as e:
                error = e
            else:
                report.quads += 1
                yield quad
                continue

        if strict:
            raise error
        report.malformed.append(error)
        logger.warning("skipping malformed N-Quads %s", error)

    if report.malformed:
        logger.info("parsed %d quads, skipped %d malformed lines", report.quads, len(report.malformed))


def read_nquads(
    source: str,
    strict: bool = False,
    default_graph: Optional[str] = None,
    report: Optional[ParseReport] = None,
) -> List[Quad]:
    """Parse a local file, ``.gz`` file, URL or ``-`` into a list of quads."""
    from riq.remote import open_dataset

    with open_dataset(source) as lines:
        return list(parse_nquads(lines, strict=strict, default_graph=default_graph, report=report))


# ------------------------
# N-Quads Serialization
# ------------------------
def serialize_nquads(quads: Iterable[Quad]) -> bytes:
    return "".join(quad.n3() + "\n" for quad in quads).encode("utf-8")


def write_nquads(path, quads: Iterable[Quad]) -> int:
    """Write quads to ``path``; returns the number of bytes written."""
    payload = serialize_nquads(quads)
    with open(path, "wb") as out:
        out.write(payload)
    return len(payload)


# ------------------------
# Graph Store
# ------------------------
class GraphStore:
    """Triples partitioned by context, with stable first-seen graph ids.

    Built once by group_by_context and not mutated afterwards.
    """

    def __init__(self, contexts: List[Term], graphs: Dict[Term, Tuple[Triple, ...]]):
        self._contexts = tuple(contexts)
        self._graphs = graphs
        self.graph_ids: Dict[Term, int] = {ctx: i for i, ctx in enumerate(self._contexts)}

    @property
    def graphs(self) -> Dict[Term, Tuple[Triple, ...]]:
        return self._graphs

    @property
    def contexts(self) -> Tuple[Term, ...]:
        return self._contexts

    def __len__(self) -> int:
        return len(self._contexts)

    def context_of(self, graph_id: int) -> Term:
        return self._contexts[graph_id]

    def triples_of(self, graph_id: int) -> Tuple[Triple, ...]:
        return self._graphs[self._contexts[graph_id]]

    @property
    def quad_count(self) -> int:
        return sum(len(triples) for triples in self._graphs.values())

    def quads(self) -> Iterator[Quad]:
        for ctx in self._contexts:
            for s, p, o in self._graphs[ctx]:
                yield Quad(s, p, o, ctx)

    def subset(self, graph_ids: Iterable[int]) -> "GraphStore":
        """A store holding only the given graphs, keeping their relative order."""
        contexts = [self._contexts[i] for i in sorted(graph_ids)]
        return GraphStore(contexts, {ctx: self._graphs[ctx] for ctx in contexts})


def group_by_context(quads: Iterable[Quad]) -> GraphStore:
    """Partition quads into graphs; duplicates dropped, ids in first-seen order."""
    buckets: Dict[Term, Dict[Triple, None]] = {}
    for quad in quads:
        bucket = buckets.get(quad.context)
        if bucket is None:
            bucket = buckets[quad.context] = {}
        bucket[quad.triple] = None
    return GraphStore(list(buckets), {ctx: tuple(triples) for ctx, triples in buckets.items()})


# ------------------------
# rdflib Interop
# ------------------------
def to_rdflib_term(term: Term):
    from rdflib import BNode, Literal, URIRef

    if term.is_iri:
        return URIRef(term.lexical)
    if term.is_blank:
        return BNode(term.lexical)
    datatype = URIRef(term.datatype) if term.datatype is not None else None
    return Literal(term.lexical, lang=term.language, datatype=datatype)


def to_rdflib_dataset(store: GraphStore):
    """Copy a GraphStore into an ``rdflib.Dataset`` with one named graph per context."""
    from rdflib import Dataset

    dataset = Dataset()
    for ctx in store.contexts:
        graph = dataset.graph(to_rdflib_term(ctx))
        for s, p, o in store.graphs[ctx]:
            graph.add((to_rdflib_term(s), to_rdflib_term(p), to_rdflib_term(o)))
    return dataset
