import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from riq.errors import ConfigError
from riq.pattern_vectors import TriplePattern, mask_triple
from riq.rdf_core import Quad, Term, Triple, write_nquads

logger = logging.getLogger(__name__)

BASE = "http://example.org"
LITERAL_SHARE = 0.2


# ------------------------
# Parameters
# ------------------------
@dataclass(frozen=True)
class GenParams:
    """Graph i draws from vocabulary i mod ``vocabularies``.

    ``overlap`` is the share of each vocabulary's predicates taken from a
    pool common to all vocabularies.
    """

    vocabularies: int = 5
    graphs: int = 200
    triples: int = 50
    overlap: float = 0.0
    predicates: int = 8
    entities: int = 40
    literals: int = 8
    seed: int = 0

    def validate(self) -> "GenParams":
        if self.vocabularies < 1 or self.graphs < 0 or self.triples < 1:
            raise ConfigError("need at least one vocabulary and one triple per graph")
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigError(f"overlap must lie in [0, 1], got {self.overlap}")
        if self.predicates < 1 or self.entities < 1:
            raise ConfigError("need at least one predicate and one entity per vocabulary")
        capacity = self.entities * self.predicates * (self.entities + self.literals)
        if self.triples > capacity:
            raise ConfigError(f"a vocabulary holds only {capacity} distinct triples, asked for {self.triples}")
        return self


@dataclass(frozen=True)
class Vocabulary:
    predicates: Tuple[Term, ...]
    entities: Tuple[Term, ...]
    literals: Tuple[Term, ...]


def vocabulary(v: int, params: GenParams) -> Vocabulary:
    shared = round(params.overlap * params.predicates)
    predicates = [Term.iri(f"{BASE}/shared/p{j}") for j in range(shared)]
    predicates += [Term.iri(f"{BASE}/vocab{v}/p{j}") for j in range(shared, params.predicates)]
    entities = [Term.iri(f"{BASE}/vocab{v}/e{j}") for j in range(params.entities)]
    literals = [Term.literal(f"vocab {v} value {j}") for j in range(params.literals)]
    return Vocabulary(tuple(predicates), tuple(entities), tuple(literals))


def graph_context(graph_id: int) -> Term:
    return Term.iri(f"{BASE}/graph/{graph_id}")


# ------------------------
# Datasets
# ------------------------
def _draw_triples(vocab: Vocabulary, count: int, rng: np.random.Generator) -> List[Triple]:
    chosen: Dict[Triple, None] = {}
    while len(chosen) < count:
        s = vocab.entities[rng.integers(len(vocab.entities))]
        p = vocab.predicates[rng.integers(len(vocab.predicates))]
        if vocab.literals and rng.random() < LITERAL_SHARE:
            o = vocab.literals[rng.integers(len(vocab.literals))]
        else:
            o = vocab.entities[rng.integers(len(vocab.entities))]
        chosen.setdefault((s, p, o), None)
    return list(chosen)


def generate_dataset(params: GenParams) -> Tuple[List[Quad], dict]:
    """Deterministic quads plus ground truth mapping each vocabulary to its graph ids."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    vocabs = [vocabulary(v, params) for v in range(params.vocabularies)]
    quads: List[Quad] = []
    members: Dict[str, List[int]] = {str(v): [] for v in range(params.vocabularies)}
    for graph_id in range(params.graphs):
        v = graph_id % params.vocabularies
        ctx = graph_context(graph_id)
        quads.extend(Quad(s, p, o, ctx) for s, p, o in _draw_triples(vocabs[v], params.triples, rng))
        members[str(v)].append(graph_id)

    truth = {
        "params": asdict(params),
        "vocabularies": members,
        "predicates": {str(v): [p.lexical for p in vocab.predicates] for v, vocab in enumerate(vocabs)},
        "contexts": {str(g): graph_context(g).lexical for g in range(params.graphs)},
    }
    logger.info("generated %d quads in %d graphs over %d vocabularies", len(quads), params.graphs, params.vocabularies)
    return quads, truth


def write_dataset(params: GenParams, out_path, truth_path: Optional[str] = None) -> Tuple[int, Path]:
    """Write the N-Quads file and its ground truth; returns (bytes written, truth path)."""
    quads, truth = generate_dataset(params)
    out_path = Path(out_path)
    size = write_nquads(out_path, quads)
    truth_file = Path(truth_path) if truth_path else out_path.with_suffix(".truth.json")
    truth_file.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return size, truth_file


# ------------------------
# Planted Queries
# ------------------------
def sample_bgp(
    triples: Sequence[Triple], rng: np.random.Generator, size: int, mask_rate: float = 0.6
) -> List[TriplePattern]:
    """A BGP that matches in the graph ``triples`` came from.

    Triples are drawn with replacement preferring ones that touch an
    already chosen term, then positions are masked; equal terms get equal
    variable names so the joins survive.
    """
    if not triples:
        return []
    chosen: List[Triple] = [triples[rng.integers(len(triples))]]
    while len(chosen) < size:
        seen = {term for t in chosen for term in t}
        linked = [t for t in triples if t[0] in seen or t[2] in seen]
        pool = linked if linked and rng.random() < 0.8 else triples
        chosen.append(pool[rng.integers(len(pool))])

    names: Dict[Term, str] = {}
    patterns = []
    for triple in chosen:
        keeps = tuple(bool(rng.random() >= mask_rate) for _ in range(3))
        var_names = [names.setdefault(term, f"v{len(names)}") for term in triple]
        patterns.append(mask_triple(triple, keeps, var_names))
    return patterns
