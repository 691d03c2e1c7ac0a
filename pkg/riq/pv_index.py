import hashlib
import json
import logging
import shutil
import threading
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from riq.config import RiqConfig
from riq.errors import ConfigError, CorruptIndex, MalformedLine, VersionMismatch
from riq.fingerprint import RabinConfig
from riq.lsh import LshParams, LshSignature, bands_collide, make_lsh_params, pv_signatures
from riq.pattern_vectors import PATTERNS, CanonicalPattern, PatternVector, pv_dump, pv_of_graph, pv_union_all
from riq.prob_filters import (
    AnyFilter,
    build_bloom,
    build_counting,
    deserialize_filter,
    estimated_fp_rate,
    filter_params,
    nbytes,
    serialize_filter,
)
from riq.rdf_core import GraphStore, Quad, Term, Triple, group_by_context, parse_nquads, parse_term

logger = logging.getLogger(__name__)

INDEX_FORMAT = "riq-index"
INDEX_VERSION = 1

MANIFEST_FILE = "manifest.json"
TOC_FILE = "groups.toc"
GRAPHS_FILE = "graphs.tsv"
GROUPS_DIR = "groups"
PVS_DIR = "pvs"


# ------------------------
# Records
# ------------------------
@dataclass
class GroupRecord:
    group_id: int
    member_graph_ids: Tuple[int, ...]
    spo_filter: AnyFilter
    pattern_filters: Tuple[AnyFilter, ...]
    quad_count: int = 0
    partition: Optional[Path] = None

    def filter_for(self, pattern: CanonicalPattern) -> AnyFilter:
        if pattern is CanonicalPattern.SPO:
            return self.spo_filter
        return self.pattern_filters[pattern.index - 1]

    @property
    def filters(self) -> Tuple[AnyFilter, ...]:
        """All seven filters in pattern order."""
        return (self.spo_filter,) + self.pattern_filters

    @property
    def filter_bytes(self) -> int:
        return sum(nbytes(f) for f in self.filters)


@dataclass
class IndexManifest:
    epsilon: float
    rabin: RabinConfig
    lsh: LshParams
    filter_seeds: Tuple[int, int]
    group_count: int
    stats: Dict[str, int] = field(default_factory=dict)
    checksums: Dict[str, str] = field(default_factory=dict)
    version: int = INDEX_VERSION

    def to_dict(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "version": self.version,
            "epsilon": self.epsilon,
            "rabin": self.rabin.to_dict(),
            "lsh": self.lsh.to_dict(),
            "filter_seeds": list(self.filter_seeds),
            "group_count": self.group_count,
            "stats": dict(self.stats),
            "checksums": dict(self.checksums),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IndexManifest":
        if data.get("format") != INDEX_FORMAT:
            raise CorruptIndex(f"manifest format is {data.get('format')!r}, expected {INDEX_FORMAT!r}")
        if data.get("version") != INDEX_VERSION:
            raise VersionMismatch(data.get("version"), INDEX_VERSION)
        try:
            return cls(
                epsilon=float(data["epsilon"]),
                rabin=RabinConfig.from_dict(data["rabin"]),
                lsh=LshParams.from_dict(data["lsh"]),
                filter_seeds=tuple(int(s) for s in data["filter_seeds"]),
                group_count=int(data["group_count"]),
                stats={k: int(v) for k, v in data.get("stats", {}).items()},
                checksums=dict(data.get("checksums", {})),
                version=int(data["version"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptIndex(f"manifest field missing or invalid: {e}")


class PvIndex:
    """The frozen group filters plus the graph directory.

    Group stores are parsed lazily from the partition files and cached.
    """

    def __init__(
        self,
        manifest: IndexManifest,
        groups: List[GroupRecord],
        contexts: Sequence[Term],
        path: Optional[Path] = None,
    ):
        self.manifest = manifest
        self.groups = groups
        self.contexts = tuple(contexts)
        self.path = path
        self._stores: Dict[int, GraphStore] = {}
        self._lock = threading.Lock()

    @property
    def epsilon(self) -> float:
        return self.manifest.epsilon

    @property
    def graph_count(self) -> int:
        return len(self.contexts)

    def group(self, group_id: int) -> GroupRecord:
        return self.groups[group_id]

    def group_store(self, group_id: int) -> GraphStore:
        return load_group_store(self, self.groups[group_id])

    def __repr__(self) -> str:
        return f"PvIndex(groups={len(self.groups)}, graphs={self.graph_count}, path={self.path})"


# ------------------------
# Similarity Groups
# ------------------------
class UnionFind:
    """Union by size with path compression over the integers 0..n-1."""

    def __init__(self, n: int):
        self._leader = list(range(n))
        self._size = [1] * n
        self.n_clusters = n

    def find(self, x: int) -> int:
        root = x
        while root != self._leader[root]:
            root = self._leader[root]
        while x != root:
            self._leader[x], x = root, self._leader[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._leader[rb] = ra
        self._size[ra] += self._size[rb]
        self.n_clusters -= 1

    def components(self) -> List[List[int]]:
        """Member lists sorted internally and ordered by their smallest member."""
        buckets: Dict[int, List[int]] = {}
        for x in range(len(self._leader)):
            buckets.setdefault(self.find(x), []).append(x)
        return sorted(buckets.values(), key=lambda members: members[0])


def build_similarity_groups(
    pvs: Sequence[PatternVector],
    params: LshParams,
    signatures: Optional[Sequence[Sequence[LshSignature]]] = None,
) -> List[List[int]]:
    """Connected components of the band-collision graph.

    Two graphs are linked when, for some pattern, the same band position
    holds the same value. Every bucket keyed (pattern, band, value) unions
    its members into the first graph that landed there.
    """
    if signatures is None:
        signatures = [pv_signatures(params, pv) for pv in pvs]
    uf = UnionFind(len(signatures))
    buckets: Dict[Tuple[int, int, int], int] = {}
    for graph_id, sigs in enumerate(signatures):
        for r, sig in enumerate(sigs):
            for band, value in enumerate(sig.values):
                first = buckets.setdefault((r, band, value), graph_id)
                if first != graph_id:
                    uf.union(first, graph_id)
    logger.debug("%d graphs fell into %d groups over %d buckets", len(signatures), uf.n_clusters, len(buckets))
    return uf.components()


def brute_force_groups(pvs: Sequence[PatternVector], params: LshParams) -> List[List[int]]:
    """Pairwise edge test plus breadth-first search; quadratic, for checking."""
    signatures = [pv_signatures(params, pv) for pv in pvs]
    n = len(signatures)
    adjacency: List[List[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if any(bands_collide(a, b) for a, b in zip(signatures[i], signatures[j])):
                adjacency[i].append(j)
                adjacency[j].append(i)

    seen = [False] * n
    components = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        members, queue = [], deque([start])
        while queue:
            node = queue.popleft()
            members.append(node)
            for nxt in adjacency[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
        components.append(sorted(members))
    return components


# ------------------------
# Group Records
# ------------------------
def build_group_filters(
    union: PatternVector, epsilon: float, seeds: Tuple[int, int]
) -> Tuple[AnyFilter, Tuple[AnyFilter, ...]]:
    """A BF over the distinct SPO fingerprints and a CBF per remaining pattern."""
    spo = CanonicalPattern.SPO
    spo_filter = build_bloom(union.fingerprints(spo), filter_params(union.distinct(spo), epsilon, seeds))
    pattern_filters = tuple(
        build_counting(union.fingerprints(p), union.counts(p), filter_params(union.distinct(p), epsilon, seeds))
        for p in PATTERNS[1:]
    )
    return spo_filter, pattern_filters


def build_group_record(
    group_id: int,
    component: Sequence[int],
    pvs: Sequence[PatternVector],
    store: GraphStore,
    epsilon: float,
    seeds: Tuple[int, int],
) -> GroupRecord:
    if not component:
        raise ValueError("a group needs at least one member graph")
    members = tuple(sorted(component))
    union = pv_union_all(pvs[g] for g in members)
    spo_filter, pattern_filters = build_group_filters(union, epsilon, seeds)
    quad_count = sum(len(store.triples_of(g)) for g in members)
    return GroupRecord(group_id, members, spo_filter, pattern_filters, quad_count)


def _summarize_graph(triples: Tuple[Triple, ...], params: LshParams) -> Tuple[PatternVector, Tuple[LshSignature, ...]]:
    pv = pv_of_graph(triples)
    return pv, pv_signatures(params, pv)


def _summarize_all(store: GraphStore, params: LshParams, workers: int):
    graphs = [store.triples_of(g) for g in range(len(store))]
    if workers > 1 and len(graphs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_summarize_graph, graphs, [params] * len(graphs), chunksize=16))
    else:
        results = [_summarize_graph(triples, params) for triples in graphs]
    pvs = [pv for pv, _ in results]
    signatures = [sigs for _, sigs in results]
    return pvs, signatures


# ------------------------
# Build
# ------------------------
def build_index(quads: Iterable[Quad], config: RiqConfig, out_dir) -> PvIndex:
    """Group graphs, freeze each group's filters and persist the index under ``out_dir``."""
    config.validate()
    store = group_by_context(quads)
    for graph_id, ctx in enumerate(store.contexts):
        size = len(store.triples_of(graph_id))
        if size > config.quad_cap:
            logger.warning("graph %s holds %d quads, above the cap of %d; indexing it whole", ctx, size, config.quad_cap)

    params = make_lsh_params(config.lsh_k, config.lsh_l, config.lsh_m, config.lsh_u, config.seed)
    pvs, signatures = _summarize_all(store, params, config.workers)
    components = build_similarity_groups(pvs, params, signatures)
    groups = [
        build_group_record(gid, members, pvs, store, config.epsilon, config.filter_seeds)
        for gid, members in enumerate(components)
    ]
    logger.info("indexed %d graphs (%d quads) into %d groups", len(store), store.quad_count, len(groups))

    manifest = IndexManifest(
        epsilon=config.epsilon,
        rabin=RabinConfig(),
        lsh=params,
        filter_seeds=tuple(config.filter_seeds),
        group_count=len(groups),
    )
    index = PvIndex(manifest, groups, store.contexts)
    write_index(index, store, out_dir, pvs=pvs if config.keep_pvs else None)
    for record in groups:
        index._stores[record.group_id] = store.subset(record.member_graph_ids)
    return index


# ------------------------
# Persistence
# ------------------------
def _sha256(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def _check_target(root: Path) -> None:
    if root.exists() and not root.is_dir():
        raise ConfigError(f"{root} exists and is not a directory")
    if root.is_dir() and any(root.iterdir()) and not (root / MANIFEST_FILE).exists():
        raise ConfigError(f"refusing to write an index into non-empty directory {root} that holds no index")


def _swap_into_place(staging: Path, root: Path) -> None:
    """Rename the finished staging directory over ``root``; the old index goes last."""
    if not root.exists():
        staging.rename(root)
        return
    retired = root.with_name(f".{root.name}.retired")
    if retired.exists():
        shutil.rmtree(retired)
    root.rename(retired)
    staging.rename(root)
    shutil.rmtree(retired)


def write_index(index: PvIndex, store: GraphStore, out_dir, pvs: Optional[Sequence[PatternVector]] = None) -> Path:
    """Write every index file and the manifest into a staging directory, then move it to ``out_dir``.

    A build that fails midway leaves any previous index at ``out_dir`` untouched.
    """
    root = Path(out_dir)
    _check_target(root)
    target = root.resolve()
    staging = target.with_name(f".{target.name}.staging")
    if staging.exists():
        shutil.rmtree(staging)
    (staging / GROUPS_DIR).mkdir(parents=True)
    checksums: Dict[str, str] = {}
    filter_bytes = data_bytes = 0

    def put(name: str, payload: bytes) -> None:
        (staging / name).write_bytes(payload)
        checksums[name] = _sha256(payload)

    try:
        graphs_tsv = "".join(f"{gid}\t{ctx.n3()}\n" for gid, ctx in enumerate(index.contexts))
        put(GRAPHS_FILE, graphs_tsv.encode("utf-8"))
        toc = "".join(f"{g.group_id}\t{','.join(map(str, g.member_graph_ids))}\n" for g in index.groups)
        put(TOC_FILE, toc.encode("utf-8"))

        for record in index.groups:
            filters = b"".join(serialize_filter(f) for f in record.filters)
            put(f"{GROUPS_DIR}/{record.group_id}.filters", filters)
            lines = sorted(
                Quad(s, p, o, store.context_of(g)).n3()
                for g in record.member_graph_ids
                for s, p, o in store.triples_of(g)
            )
            partition = "".join(line + "\n" for line in lines).encode("utf-8")
            put(f"{GROUPS_DIR}/{record.group_id}.nq", partition)
            filter_bytes += len(filters)
            data_bytes += len(partition)

        if pvs is not None:
            (staging / PVS_DIR).mkdir()
            for gid, pv in enumerate(pvs):
                put(f"{PVS_DIR}/{gid}.pv", pv_dump(pv).encode("utf-8"))

        index.manifest.stats = {
            "graphs": len(index.contexts),
            "quads": store.quad_count,
            "groups": len(index.groups),
            "filter_bytes": filter_bytes,
            "data_bytes": data_bytes,
        }
        index.manifest.checksums = checksums
        manifest = json.dumps(index.manifest.to_dict(), indent=2, sort_keys=True) + "\n"
        (staging / MANIFEST_FILE).write_text(manifest, encoding="utf-8")
        _swap_into_place(staging, target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    for record in index.groups:
        record.partition = root / GROUPS_DIR / f"{record.group_id}.nq"
    index.path = root
    logger.info("wrote index to %s (%d filter bytes, %d data bytes)", root, filter_bytes, data_bytes)
    return root


def _read_checked(root: Path, name: str, manifest: IndexManifest) -> bytes:
    path = root / name
    if not path.is_file():
        raise CorruptIndex(f"missing file {name}")
    payload = path.read_bytes()
    expected = manifest.checksums.get(name)
    if expected is None:
        raise CorruptIndex(f"no checksum recorded for {name}")
    if _sha256(payload) != expected:
        raise CorruptIndex(f"checksum mismatch for {name}")
    return payload


def _read_filters(payload: bytes, name: str) -> List[AnyFilter]:
    filters, offset = [], 0
    while offset < len(payload):
        f, offset = deserialize_filter(payload, offset)
        filters.append(f)
    if len(filters) != len(PATTERNS):
        raise CorruptIndex(f"{name} holds {len(filters)} filters, expected {len(PATTERNS)}")
    return filters


def _check_filter_params(filters: Sequence[AnyFilter], manifest: IndexManifest, name: str) -> None:
    """Every filter header must carry the manifest's epsilon and seeds."""
    for f in filters:
        if f.params.epsilon != manifest.epsilon or tuple(f.params.seeds) != manifest.filter_seeds:
            raise CorruptIndex(
                f"{name} was built with epsilon {f.params.epsilon} and seeds {tuple(f.params.seeds)}, "
                f"manifest says epsilon {manifest.epsilon} and seeds {manifest.filter_seeds}"
            )


def load_index(path) -> PvIndex:
    """Open an index directory, validating the manifest and every checksum."""
    root = Path(path)
    manifest_path = root / MANIFEST_FILE
    if not manifest_path.is_file():
        raise CorruptIndex(f"no {MANIFEST_FILE} in {root}")
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise CorruptIndex(f"unreadable manifest: {e}")
    manifest = IndexManifest.from_dict(data)
    if manifest.rabin != RabinConfig():
        raise VersionMismatch(manifest.rabin, RabinConfig(), what="fingerprint polynomial")

    try:
        contexts = []
        for line in _read_checked(root, GRAPHS_FILE, manifest).decode("utf-8").splitlines():
            gid, text = line.split("\t", 1)
            if int(gid) != len(contexts):
                raise CorruptIndex(f"{GRAPHS_FILE} is out of order at graph {gid}")
            contexts.append(parse_term(text))

        groups = []
        for line in _read_checked(root, TOC_FILE, manifest).decode("utf-8").splitlines():
            gid_text, members_text = line.split("\t", 1)
            gid = int(gid_text)
            members = tuple(int(m) for m in members_text.split(",") if m)
            name = f"{GROUPS_DIR}/{gid}.filters"
            filters = _read_filters(_read_checked(root, name, manifest), name)
            _check_filter_params(filters, manifest, name)
            partition_name = f"{GROUPS_DIR}/{gid}.nq"
            partition = root / partition_name
            if not partition.is_file():
                raise CorruptIndex(f"missing file {partition_name}")
            groups.append(GroupRecord(gid, members, filters[0], tuple(filters[1:]), partition=partition))
    except (ValueError, MalformedLine) as e:
        raise CorruptIndex(f"malformed directory entry: {e}")

    if len(groups) != manifest.group_count:
        raise CorruptIndex(f"{TOC_FILE} lists {len(groups)} groups, manifest says {manifest.group_count}")
    if sorted(g for record in groups for g in record.member_graph_ids) != list(range(len(contexts))):
        raise CorruptIndex("group members do not partition the graph directory")
    for record in groups:
        record.quad_count = _partition_quad_count(record.partition)

    logger.info("loaded index %s: %d groups over %d graphs", root, len(groups), len(contexts))
    return PvIndex(manifest, groups, contexts, path=root)


def _partition_quad_count(path: Path) -> int:
    with open(path, "rb") as stream:
        return sum(1 for line in stream if line.strip())


def load_group_store(index: PvIndex, record: GroupRecord) -> GraphStore:
    """Parse a group's partition into a GraphStore, once per index."""
    with index._lock:
        cached = index._stores.get(record.group_id)
    if cached is not None:
        return cached
    if record.partition is None:
        raise CorruptIndex(f"group {record.group_id} has no partition file")
    payload = _read_checked(index.path, f"{GROUPS_DIR}/{record.group_id}.nq", index.manifest)
    parsed = group_by_context(parse_nquads(payload.splitlines(), strict=True))
    contexts = [index.contexts[g] for g in record.member_graph_ids]
    foreign = set(parsed.contexts) - set(contexts)
    if foreign:
        raise CorruptIndex(f"group {record.group_id} partition holds {len(foreign)} graphs outside the group")
    store = GraphStore(contexts, {ctx: parsed.graphs.get(ctx, ()) for ctx in contexts})
    with index._lock:
        return index._stores.setdefault(record.group_id, store)


# ------------------------
# Stats
# ------------------------
def index_stats(index: PvIndex) -> dict:
    """Group sizes, filter sizes and false-positive estimates; read-only."""
    groups = []
    for record in index.groups:
        groups.append(
            {
                "group_id": record.group_id,
                "members": len(record.member_graph_ids),
                "quads": record.quad_count,
                "filter_bytes": record.filter_bytes,
                "max_estimated_fp_rate": max((estimated_fp_rate(f.params) for f in record.filters), default=0.0),
            }
        )
    filter_bytes = sum(g["filter_bytes"] for g in groups)
    data_bytes = index.manifest.stats.get("data_bytes", 0)
    return {
        "groups": len(groups),
        "graphs": index.graph_count,
        "quads": sum(g["quads"] for g in groups),
        "filter_bytes": filter_bytes,
        "data_bytes": data_bytes,
        "filter_data_ratio": filter_bytes / data_bytes if data_bytes else 0.0,
        "largest_group": max((g["members"] for g in groups), default=0),
        "singleton_groups": sum(1 for g in groups if g["members"] == 1),
        "epsilon": index.epsilon,
        "per_group": groups,
    }
