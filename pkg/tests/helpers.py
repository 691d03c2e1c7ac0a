from riq.config import get_config
from riq.datagen import sample_bgp
from riq.pattern_vectors import TriplePattern
from riq.rdf_core import Quad, Term

EX = "http://example.org/"
XSD_INTEGER = "http://www.w3.org/2001/XMLSchema#integer"


def iri(name: str) -> Term:
    return Term.iri(EX + name)


def lit(value: str, **kw) -> Term:
    return Term.literal(value, **kw)


def quad(s: str, p: str, o, g: str) -> Quad:
    obj = o if isinstance(o, Term) else iri(o)
    return Quad(iri(s), iri(p), obj, iri(g))


def riq_config(**overrides):
    """Library config isolated from RIQ_* variables in the calling shell."""
    return get_config(environ={}, **{"workers": 1, **overrides})


def bgp_text(patterns) -> str:
    return " . ".join(str(tp) for tp in patterns)


def select_all(body: str, graph_var: str = "g") -> str:
    return f"SELECT * WHERE {{ GRAPH ?{graph_var} {{ {body} }} }}"


def as_patterns(*specs):
    return [TriplePattern(*spec) for spec in specs]


# ------------------------
# Random Queries
# ------------------------
def _linked_pattern(triples, names, rng) -> str:
    """One pattern from ``triples`` reusing variable names for known terms."""
    s, p, o = triples[rng.integers(len(triples))]

    def node(term, keep_chance):
        if term in names and rng.random() < 0.7:
            return f"?{names[term]}"
        if rng.random() < keep_chance:
            return term.n3()
        return f"?{names.setdefault(term, f'v{len(names)}')}"

    return f"{node(s, 0.3)} {node(p, 0.8)} {node(o, 0.3)}"


def random_query(store, rng) -> str:
    """A query mixing BGPs, OPTIONAL, UNION, FILTER, EXISTS and NOT EXISTS."""
    triples = store.triples_of(int(rng.integers(len(store))))
    other = store.triples_of(int(rng.integers(len(store))))
    names = {}
    parts = [" . ".join(_linked_pattern(triples, names, rng) for _ in range(int(rng.integers(1, 4))))]

    if rng.random() < 0.5:
        source = triples if rng.random() < 0.6 else other
        parts.append(f"OPTIONAL {{ {_linked_pattern(source, names, rng)} }}")
    if rng.random() < 0.4:
        left = _linked_pattern(triples, names, rng)
        right = _linked_pattern(other, names, rng)
        parts.append(f"{{ {left} }} UNION {{ {right} }}")
    if names and rng.random() < 0.5:
        var = sorted(names.values())[int(rng.integers(len(names)))]
        choice = int(rng.integers(4))
        if choice == 0:
            parts.append(f"FILTER (bound(?{var}))")
        elif choice == 1:
            term = triples[int(rng.integers(len(triples)))][2]
            parts.append(f"FILTER (?{var} != {term.n3()})")
        elif choice == 2:
            parts.append(f'FILTER regex(?{var}, "value [0-2]")')
        else:
            parts.append(f"FILTER (!bound(?{var}) || ?{var} = ?{var})")
    if rng.random() < 0.3:
        keyword = "EXISTS" if rng.random() < 0.5 else "NOT EXISTS"
        source = triples if rng.random() < 0.5 else other
        parts.append(f"FILTER {keyword} {{ {_linked_pattern(source, names, rng)} }}")
    return select_all(" . ".join(parts))


def planted_query(triples, rng, size: int) -> str:
    return select_all(bgp_text(sample_bgp(triples, rng, size)))
