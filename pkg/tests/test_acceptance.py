import numpy as np
import pytest

from riq.datagen import GenParams, generate_dataset, vocabulary
from riq.pv_index import build_index, index_stats
from riq.query_engine import answer_query, brute_force, find_candidates
from riq.rdf_core import group_by_context
from riq.sparql import parse_query

from helpers import planted_query, random_query, riq_config, select_all

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def default_dataset():
    return generate_dataset(GenParams())


@pytest.fixture(scope="module")
def default_index(default_dataset, tmp_path_factory):
    quads, _ = default_dataset
    return build_index(quads, riq_config(), tmp_path_factory.mktemp("default") / "index")


@pytest.fixture(scope="module")
def planted_dataset():
    params = GenParams(vocabularies=4, graphs=100, triples=40, predicates=6, entities=15, literals=4, overlap=0.25, seed=21)
    quads, _ = generate_dataset(params)
    return quads, group_by_context(quads)


@pytest.fixture(scope="module")
def planted_index(planted_dataset, tmp_path_factory):
    return build_index(planted_dataset[0], riq_config(), tmp_path_factory.mktemp("planted") / "index")


def group_of(index):
    return {gid: record.group_id for record in index.groups for gid in record.member_graph_ids}


def test_no_false_dismissals(planted_index, planted_dataset):
    _, store = planted_dataset
    rng = np.random.default_rng(2024)
    owner = group_of(planted_index)
    for _ in range(1000):
        g = int(rng.integers(len(store)))
        q = parse_query(planted_query(store.triples_of(g), rng, int(rng.integers(1, 23))))
        report = find_candidates(q, planted_index)
        assert owner[g] in report.candidate_group_ids, q.text


def test_planted_queries_answer_from_their_graph(small_index, small_store):
    rng = np.random.default_rng(31)
    for _ in range(100):
        g = int(rng.integers(len(small_store)))
        q = parse_query(planted_query(small_store.triples_of(g), rng, int(rng.integers(1, 6))))
        table = answer_query(q, small_index)
        at = table.columns.index("g")
        assert any(row[at] == small_store.context_of(g) for row in table.rows), q.text



def test_answers_match_unindexed_evaluation(small_index, small_store):
    rng = np.random.default_rng(99)
    nonempty = 0
    for _ in range(500):
        q = parse_query(random_query(small_store, rng))
        expected = brute_force(q, small_store)
        got = answer_query(q, small_index)
        assert got.columns == expected.columns
        assert got.as_bag() == expected.as_bag(), q.text
        nonempty += bool(len(expected))
    assert nonempty > 50


def test_vocabulary_queries_prune_other_groups(default_index, default_dataset):
    _, truth = default_dataset
    vocab0 = set(truth["vocabularies"]["0"])
    p0, p1, p2 = (p.n3() for p in vocabulary(0, GenParams()).predicates[:3])
    q = parse_query(select_all(f"?a {p0} ?b . ?c {p1} ?d . ?e {p2} ?f"))
    report = find_candidates(q, default_index)

    containing = {r.group_id for r in default_index.groups if vocab0 & set(r.member_graph_ids)}
    assert containing <= set(report.candidate_group_ids)
    bound = len(default_index.groups) * (default_index.epsilon + 0.05) + len(containing)
    assert len(report.candidate_group_ids) <= bound

    members = [g for r in default_index.groups if r.group_id in report.candidate_group_ids for g in r.member_graph_ids]
    assert sum(g in vocab0 for g in members) / len(members) >= 0.95


def test_filters_stay_compact(default_index):
    stats = index_stats(default_index)
    assert stats["graphs"] == 200
    assert stats["filter_data_ratio"] <= 0.15


def test_answers_are_deterministic(small_dataset, small_store, tmp_path):
    quads, _ = small_dataset
    first = build_index(quads, riq_config(), tmp_path / "one")
    second = build_index(quads, riq_config(), tmp_path / "two")
    rng = np.random.default_rng(7)
    for _ in range(50):
        q = parse_query(random_query(small_store, rng))
        assert find_candidates(q, first).candidate_group_ids == find_candidates(q, second).candidate_group_ids
        assert answer_query(q, first).rows == answer_query(q, second).rows
