from collections import Counter

import numpy as np
import pytest

from riq.fingerprint import masked_fingerprint
from riq.pattern_vectors import (
    PATTERNS,
    CanonicalPattern,
    PatternVector,
    TriplePattern,
    Variable,
    f_D,
    f_Q,
    multiset_jaccard,
    pv_contains,
    pv_dump,
    pv_load,
    pv_of_bgp,
    pv_of_graph,
    pv_similarity,
    pv_union,
    pv_union_all,
)
from riq.datagen import sample_bgp

from helpers import iri, lit

S, P, O = iri("s"), iri("p"), iri("o")
V = Variable


def vector(pattern, entries):
    rows = [[] for _ in PATTERNS]
    rows[pattern.index] = list(entries)
    return PatternVector.from_entries(rows)


def random_graph(rng, n=20):
    ents = [iri(f"e{i}") for i in range(8)]
    preds = [iri(f"p{i}") for i in range(4)]
    triples = {
        (ents[rng.integers(8)], preds[rng.integers(4)], ents[rng.integers(8)] if rng.random() < 0.8 else lit(f"v{rng.integers(3)}"))
        for _ in range(n)
    }
    return sorted(triples, key=lambda t: tuple(x.n3() for x in t))


# ------------------------
# Transformations
# ------------------------
def test_f_d_masks_positions():
    assert f_D(CanonicalPattern.SPO, (S, P, O)) == (S, P, O)
    assert f_D(CanonicalPattern.xPx, (S, P, O)) == (None, P, None)
    assert f_D(CanonicalPattern.SxO, (S, P, O)) == (S, None, O)


def test_f_q_selects_pattern_and_drops_names():
    pattern, masked = f_Q(TriplePattern(V("s1"), iri("producer"), V("o1")))
    assert pattern is CanonicalPattern.xPx
    assert masked == (None, iri("producer"), None)
    assert f_Q(TriplePattern(V("s1"), iri("producer"), V("o1"))) == f_Q(TriplePattern(V("s2"), iri("producer"), V("o2")))


def test_f_q_all_variables_has_no_pattern():
    assert f_Q(TriplePattern(V("s"), V("p"), V("o"))) == (None, (None, None, None))


def test_alignment_of_data_and_query_sides():
    triple = (S, P, O)
    for pattern in PATTERNS:
        tp = TriplePattern(*(t if keep else V(f"x{i}") for i, (t, keep) in enumerate(zip(triple, pattern.keeps))))
        q_pattern, masked = f_Q(tp)
        assert q_pattern is pattern
        assert masked_fingerprint(pattern.tag, *masked) == masked_fingerprint(pattern.tag, *f_D(pattern, triple))


# ------------------------
# Construction
# ------------------------
def test_empty_graph_and_bgp():
    assert pv_of_graph([]).is_empty
    assert pv_of_bgp([]).is_empty
    assert pv_of_graph([]) == PatternVector.empty()


def test_shared_predicate_accumulates_multiplicity():
    a, b, c, d = iri("a"), iri("b"), iri("c"), iri("d")
    pv = pv_of_graph([(a, P, b), (c, P, d)])
    fp = masked_fingerprint(CanonicalPattern.xPx.tag, None, P, None)
    assert pv.entries(CanonicalPattern.xPx) == [(fp, 2)]
    assert all(m == 1 for _, m in pv.entries(CanonicalPattern.SPO))


def test_every_pattern_totals_graph_size(rng):
    triples = random_graph(rng)
    pv = pv_of_graph(triples)
    assert all(pv.total(p) == len(triples) for p in PATTERNS)


def test_bgp_of_two_var_var_patterns():
    bgp = [
        TriplePattern(V("producer"), iri("producer_name"), V("name")),
        TriplePattern(V("producer"), iri("label"), V("label")),
    ]
    pv = pv_of_bgp(bgp)
    assert pv.distinct(CanonicalPattern.xPx) == 2
    assert all(pv.distinct(p) == 0 for p in PATTERNS if p is not CanonicalPattern.xPx)


def test_identical_patterns_modulo_names_count_twice():
    bgp = [TriplePattern(V("s1"), iri("producer"), V("o1")), TriplePattern(V("s2"), iri("producer"), V("o2"))]
    pv = pv_of_bgp(bgp)
    assert [m for _, m in pv.entries(CanonicalPattern.xPx)] == [2]


def test_constant_patterns_are_a_set():
    pv = pv_of_bgp([TriplePattern(S, P, O), TriplePattern(S, P, O)])
    assert pv.total(CanonicalPattern.SPO) == 1


def test_support_lists_distinct_fingerprints():
    pv = vector(CanonicalPattern.Sxx, [(5, 3), (2, 1)])
    assert pv.support(CanonicalPattern.Sxx) == [2, 5]
    assert pv.support(CanonicalPattern.SPO) == []


# ------------------------
# Operations
# ------------------------
def test_union_takes_max_multiplicity():
    r = CanonicalPattern.SxO
    a = vector(r, [(1, 1), (2, 2)])
    b = vector(r, [(2, 1), (3, 3)])
    assert pv_union(a, b).entries(r) == [(1, 1), (2, 2), (3, 3)]


def test_union_identity_and_idempotence(rng):
    p = pv_of_graph(random_graph(rng))
    assert pv_union(p, PatternVector.empty()) == p
    assert pv_union(p, p) == p


def test_union_laws(rng):
    a, b, c = (pv_of_graph(random_graph(rng)) for _ in range(3))
    assert pv_union(a, b) == pv_union(b, a)
    assert pv_union(pv_union(a, b), c) == pv_union(a, pv_union(b, c))
    assert pv_union_all([a, b, c]) == pv_union(pv_union(a, b), c)
    assert pv_contains(pv_union(a, b), a)


def test_similarity_examples(rng):
    r = CanonicalPattern.SPO
    a = vector(r, [(1, 1), (2, 1), (3, 1)])
    b = vector(r, [(2, 1), (3, 1), (4, 1)])
    assert pv_similarity(a, b) == pytest.approx(0.5)
    assert pv_similarity(a, vector(r, [(9, 1)])) == 0.0
    assert pv_similarity(PatternVector.empty(), PatternVector.empty()) == 0.0
    p = pv_of_graph(random_graph(rng))
    assert pv_similarity(p, p) == 1.0


def test_multiset_jaccard_matches_counter_oracle(rng):
    for _ in range(50):
        ma = Counter({int(k): int(rng.integers(1, 4)) for k in rng.integers(0, 12, size=6)})
        mb = Counter({int(k): int(rng.integers(1, 4)) for k in rng.integers(0, 12, size=6)})
        expected = sum((ma & mb).values()) / sum((ma | mb).values())
        a = vector(CanonicalPattern.xxO, ma.items())
        b = vector(CanonicalPattern.xxO, mb.items())
        r = CanonicalPattern.xxO
        got = multiset_jaccard(a.fingerprints(r), a.counts(r), b.fingerprints(r), b.counts(r))
        assert got == pytest.approx(expected)
        assert pv_similarity(a, b) == pytest.approx(pv_similarity(b, a))


def test_contains_examples(rng):
    p = pv_of_graph(random_graph(rng))
    assert pv_contains(p, PatternVector.empty())
    assert not pv_contains(p, vector(CanonicalPattern.SPO, [(12345, 1)]))
    r = CanonicalPattern.xPx
    assert not pv_contains(vector(r, [(7, 1)]), vector(r, [(7, 2)]))
    assert pv_contains(vector(r, [(7, 3)]), vector(r, [(7, 2)]))


def test_masked_subgraphs_are_contained(rng):
    """Masking a graph's own triples yields a BGP whose vector it contains; repeats dropped as the parser does."""
    for _ in range(300):
        triples = random_graph(rng, n=int(rng.integers(1, 30)))
        bgp = list(dict.fromkeys(sample_bgp(triples, rng, int(rng.integers(1, 8)))))
        assert pv_contains(pv_of_graph(triples), pv_of_bgp(bgp))


@pytest.mark.slow
def test_masked_subgraphs_are_contained_at_scale():
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        triples = random_graph(rng, n=int(rng.integers(1, 25)))
        bgp = list(dict.fromkeys(sample_bgp(triples, rng, int(rng.integers(1, 6)), mask_rate=float(rng.random()))))
        assert pv_contains(pv_of_graph(triples), pv_of_bgp(bgp))


def test_dump_round_trip(rng):
    pv = pv_of_graph(random_graph(rng))
    text = pv_dump(pv)
    first = text.splitlines()[0].split("\t")
    assert first[0] == "SPO" and len(first[1]) == 16
    assert pv_load(text) == pv
    assert pv_load(pv_dump(PatternVector.empty())).is_empty
