from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from riq.fingerprint import masked_fingerprint
from riq.rdf_core import Term, Triple

MaskedTriple = Tuple[Optional[Term], Optional[Term], Optional[Term]]


# ------------------------
# Canonical Patterns
# ------------------------
class CanonicalPattern(Enum):
    """The seven constant/wildcard position masks, in serialization order."""

    SPO = "SPO"
    SPx = "SP?"
    SxO = "S?O"
    xPO = "?PO"
    Sxx = "S??"
    xPx = "?P?"
    xxO = "??O"

    @property
    def index(self) -> int:
        return _PATTERN_INDEX[self]

    @property
    def tag(self) -> int:
        """Tag byte heading the canonical encoding of a masked triple."""
        return 0x30 + self.index

    @property
    def keeps(self) -> Tuple[bool, bool, bool]:
        return tuple(ch != "?" for ch in self.value)

    @classmethod
    def from_keeps(cls, keeps: Tuple[bool, bool, bool]) -> "CanonicalPattern":
        return _PATTERN_BY_KEEPS[keeps]


PATTERNS: Tuple[CanonicalPattern, ...] = tuple(CanonicalPattern)
_PATTERN_INDEX = {pattern: i for i, pattern in enumerate(PATTERNS)}
_PATTERN_BY_KEEPS = {pattern.keeps: pattern for pattern in PATTERNS}


@dataclass(frozen=True)
class Variable:
    """A query variable. Blank nodes in query patterns are variables named ``_:label``."""

    name: str

    @property
    def is_blank(self) -> bool:
        return self.name.startswith("_:")

    def __str__(self) -> str:
        return self.name if self.is_blank else f"?{self.name}"


Node = Union[Term, Variable]


@dataclass(frozen=True)
class TriplePattern:
    subject: Node
    predicate: Node
    object: Node

    def __iter__(self) -> Iterator[Node]:
        return iter((self.subject, self.predicate, self.object))

    def variables(self) -> List[str]:
        return [node.name for node in self if isinstance(node, Variable)]

    def __str__(self) -> str:
        return " ".join(node.n3() if isinstance(node, Term) else str(node) for node in self)


# ------------------------
# Transformations
# ------------------------
def f_D(pattern: CanonicalPattern, triple: Triple) -> MaskedTriple:
    """Mask a data triple to the positions ``pattern`` keeps."""
    ks, kp, ko = pattern.keeps
    s, p, o = triple
    return (s if ks else None, p if kp else None, o if ko else None)


def f_Q(tp: TriplePattern) -> Tuple[Optional[CanonicalPattern], MaskedTriple]:
    """Canonical pattern of a triple pattern and its masked form; variable names are dropped.

    ``?s ?p ?o`` has no canonical pattern and yields ``(None, (None, None, None))``.
    """
    masked = tuple(None if isinstance(node, Variable) else node for node in tp)
    keeps = tuple(node is not None for node in masked)
    if keeps == (False, False, False):
        return None, masked
    return CanonicalPattern.from_keeps(keeps), masked


def mask_triple(triple: Triple, keeps: Tuple[bool, bool, bool], names: Sequence[str]) -> TriplePattern:
    """Replace the positions not kept with variables named from ``names``."""
    nodes = [term if keep else Variable(name) for term, keep, name in zip(triple, keeps, names)]
    return TriplePattern(*nodes)


# ------------------------
# Pattern Vectors
# ------------------------
_EMPTY_FPS = np.zeros(0, dtype=np.uint64)
_EMPTY_COUNTS = np.zeros(0, dtype=np.int64)


def _normalize(fps: np.ndarray, counts: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Sort and merge duplicate fingerprints, summing their multiplicities."""
    fps = np.asarray(fps, dtype=np.uint64)
    if counts is None:
        counts = np.ones(len(fps), dtype=np.int64)
    if len(fps) == 0:
        return _EMPTY_FPS, _EMPTY_COUNTS
    unique, inverse = np.unique(fps, return_inverse=True)
    merged = np.zeros(len(unique), dtype=np.int64)
    np.add.at(merged, inverse.ravel(), np.asarray(counts, dtype=np.int64))
    return unique, merged


class PatternVector:
    """Seven fingerprint multisets, one per canonical pattern, sorted by fingerprint."""

    __slots__ = ("_fps", "_counts")

    def __init__(self, fps: Sequence[np.ndarray], counts: Sequence[np.ndarray]):
        if len(fps) != len(PATTERNS) or len(counts) != len(PATTERNS):
            raise ValueError("a pattern vector has exactly seven components")
        self._fps = tuple(fps)
        self._counts = tuple(counts)

    @classmethod
    def empty(cls) -> "PatternVector":
        return cls([_EMPTY_FPS] * len(PATTERNS), [_EMPTY_COUNTS] * len(PATTERNS))

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[Tuple[int, int]]]) -> "PatternVector":
        """Build from per-pattern lists of (fingerprint, multiplicity) pairs."""
        fps, counts = [], []
        for pairs in entries:
            f, c = _normalize(
                np.array([fp for fp, _ in pairs], dtype=np.uint64),
                np.array([m for _, m in pairs], dtype=np.int64),
            )
            fps.append(f)
            counts.append(c)
        return cls(fps, counts)

    def fingerprints(self, pattern: CanonicalPattern) -> np.ndarray:
        return self._fps[pattern.index]

    def support(self, pattern: CanonicalPattern) -> List[int]:
        return [int(f) for f in self._fps[pattern.index]]

    def counts(self, pattern: CanonicalPattern) -> np.ndarray:
        return self._counts[pattern.index]

    def entries(self, pattern: CanonicalPattern) -> List[Tuple[int, int]]:
        return [(int(f), int(c)) for f, c in zip(self._fps[pattern.index], self._counts[pattern.index])]

    def distinct(self, pattern: CanonicalPattern) -> int:
        return len(self._fps[pattern.index])

    def total(self, pattern: CanonicalPattern) -> int:
        return int(self._counts[pattern.index].sum())

    @property
    def is_empty(self) -> bool:
        return all(len(f) == 0 for f in self._fps)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PatternVector):
            return NotImplemented
        return all(
            np.array_equal(a, b) and np.array_equal(c, d)
            for a, b, c, d in zip(self._fps, other._fps, self._counts, other._counts)
        )

    def __repr__(self) -> str:
        sizes = ", ".join(f"{p.value}:{self.distinct(p)}/{self.total(p)}" for p in PATTERNS)
        return f"PatternVector({sizes})"


def pv_of_graph(triples: Iterable[Triple]) -> PatternVector:
    """One insertion per triple per canonical pattern."""
    triples = list(triples)
    fps, counts = [], []
    for pattern in PATTERNS:
        tag = pattern.tag
        raw = np.fromiter(
            (masked_fingerprint(tag, *f_D(pattern, t)) for t in triples), dtype=np.uint64, count=len(triples)
        )
        f, c = _normalize(raw)
        fps.append(f)
        counts.append(c)
    return PatternVector(fps, counts)


def pv_of_bgp(patterns: Iterable[TriplePattern]) -> PatternVector:
    """Each triple pattern adds one fingerprint to the vector f_Q selects.

    The SPO component is a set; all-constant patterns are deduplicated.
    """
    buckets: List[List[int]] = [[] for _ in PATTERNS]
    for tp in patterns:
        pattern, masked = f_Q(tp)
        if pattern is None:
            continue
        buckets[pattern.index].append(masked_fingerprint(pattern.tag, *masked))
    buckets[CanonicalPattern.SPO.index] = sorted(set(buckets[CanonicalPattern.SPO.index]))
    fps, counts = [], []
    for bucket in buckets:
        f, c = _normalize(np.array(bucket, dtype=np.uint64))
        fps.append(f)
        counts.append(c)
    return PatternVector(fps, counts)


# ------------------------
# Operations
# ------------------------
def _union_component(fa, ca, fb, cb) -> Tuple[np.ndarray, np.ndarray]:
    if len(fb) == 0:
        return fa, ca
    if len(fa) == 0:
        return fb, cb
    unique, inverse = np.unique(np.concatenate([fa, fb]), return_inverse=True)
    merged = np.zeros(len(unique), dtype=np.int64)
    np.maximum.at(merged, inverse.ravel(), np.concatenate([ca, cb]))
    return unique, merged


def pv_union(a: PatternVector, b: PatternVector) -> PatternVector:
    """Per-pattern multiset union taking the larger multiplicity."""
    fps, counts = [], []
    for pattern in PATTERNS:
        f, c = _union_component(a.fingerprints(pattern), a.counts(pattern), b.fingerprints(pattern), b.counts(pattern))
        fps.append(f)
        counts.append(c)
    return PatternVector(fps, counts)


def multiset_jaccard(fa, ca, fb, cb) -> float:
    """Sum of min multiplicities over sum of max multiplicities; 0 when both are empty."""
    if len(fa) == 0 and len(fb) == 0:
        return 0.0
    _, ia, ib = np.intersect1d(fa, fb, assume_unique=True, return_indices=True)
    inter = int(np.minimum(ca[ia], cb[ib]).sum())
    union = int(ca.sum()) + int(cb.sum()) - inter
    return inter / union if union else 0.0


def pv_union_all(pvs: Iterable[PatternVector]) -> PatternVector:
    """Fold pv_union over many vectors in one pass per pattern."""
    pvs = list(pvs)
    if not pvs:
        return PatternVector.empty()
    if len(pvs) == 1:
        return pvs[0]
    fps, counts = [], []
    for pattern in PATTERNS:
        all_fps = np.concatenate([pv.fingerprints(pattern) for pv in pvs])
        all_counts = np.concatenate([pv.counts(pattern) for pv in pvs])
        if len(all_fps) == 0:
            fps.append(_EMPTY_FPS)
            counts.append(_EMPTY_COUNTS)
            continue
        unique, inverse = np.unique(all_fps, return_inverse=True)
        merged = np.zeros(len(unique), dtype=np.int64)
        np.maximum.at(merged, inverse.ravel(), all_counts)
        fps.append(unique)
        counts.append(merged)
    return PatternVector(fps, counts)


def pv_similarity(a: PatternVector, b: PatternVector) -> float:
    return max(
        multiset_jaccard(a.fingerprints(p), a.counts(p), b.fingerprints(p), b.counts(p)) for p in PATTERNS
    )


def component_contains(fc, cc, fq, cq) -> bool:
    """Multiset containment of one component: every query multiplicity is covered."""
    if len(fq) == 0:
        return True
    if len(fc) == 0:
        return False
    pos = np.searchsorted(fc, fq)
    pos_clipped = np.minimum(pos, len(fc) - 1)
    found = fc[pos_clipped] == fq
    if not found.all():
        return False
    return bool((cc[pos_clipped] >= cq).all())


def pv_contains(c: PatternVector, q: PatternVector) -> bool:
    """Exact form of the necessary condition: q's multisets are contained in c's."""
    return all(component_contains(c.fingerprints(p), c.counts(p), q.fingerprints(p), q.counts(p)) for p in PATTERNS)


# ------------------------
# Debug Dump
# ------------------------
def pv_dump(pv: PatternVector) -> str:
    lines = []
    for pattern in PATTERNS:
        for fp, mult in pv.entries(pattern):
            lines.append(f"{pattern.value}\t{fp:016x}\t{mult}")
    return "\n".join(lines) + ("\n" if lines else "")


def pv_load(text: str) -> PatternVector:
    entries: List[List[Tuple[int, int]]] = [[] for _ in PATTERNS]
    for line in text.splitlines():
        if not line.strip():
            continue
        name, fp, mult = line.split("\t")
        entries[CanonicalPattern(name).index].append((int(fp, 16), int(mult)))
    return PatternVector.from_entries(entries)
