import math
import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from riq.config import DEFAULT_FILTER_SEEDS
from riq.errors import CorruptIndex, ParamMismatch, VersionMismatch

MAGIC = b"RIQF"
FORMAT_VERSION = 1
MIN_CELLS = 8
COUNTER_MAX = np.iinfo(np.uint16).max

TYPE_BF = 0
TYPE_CBF = 1
TYPE_EMPTY = 2

_HEADER = struct.Struct("<4sIBQdQIQQ")

_U64 = np.uint64
_MIX_1 = _U64(0xBF58476D1CE4E5B9)
_MIX_2 = _U64(0x94D049BB133111EB)


# ------------------------
# Parameters
# ------------------------
@dataclass(frozen=True)
class FilterParams:
    capacity: int
    epsilon: float
    m_cells: int
    k_hashes: int
    seeds: Tuple[int, int] = DEFAULT_FILTER_SEEDS

    @property
    def is_empty(self) -> bool:
        return self.capacity == 0


def filter_params(capacity: int, epsilon: float, seeds: Tuple[int, int] = DEFAULT_FILTER_SEEDS) -> FilterParams:
    """Size a filter for ``capacity`` distinct items at false-positive rate ``epsilon``."""
    if capacity < 0:
        raise ValueError(f"capacity must be >= 0, got {capacity}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if capacity == 0:
        return FilterParams(0, epsilon, 0, 0, tuple(seeds))
    m_cells = max(MIN_CELLS, math.ceil(-capacity * math.log(epsilon) / (math.log(2) ** 2)))
    k_hashes = max(1, round((m_cells / capacity) * math.log(2)))
    return FilterParams(capacity, epsilon, m_cells, k_hashes, tuple(seeds))


def estimated_fp_rate(params: FilterParams, inserted: Optional[int] = None) -> float:
    """Standard Bloom false-positive estimate after ``inserted`` distinct items."""
    if params.is_empty:
        return 0.0
    n = params.capacity if inserted is None else inserted
    return (1.0 - math.exp(-params.k_hashes * n / params.m_cells)) ** params.k_hashes


def _mix(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> _U64(30))
    x = x * _MIX_1
    x = x ^ (x >> _U64(27))
    x = x * _MIX_2
    return x ^ (x >> _U64(31))


def probe_positions(params: FilterParams, items) -> np.ndarray:
    """Double hashing: h_i(x) = (h1(x) + i*h2(x)) mod m, one row of k cells per item."""
    fps = np.atleast_1d(np.asarray(items, dtype=np.uint64))
    swapped = (fps << _U64(32)) | (fps >> _U64(32))
    h1 = _mix(fps ^ _U64(params.seeds[0]))
    h2 = _mix(swapped ^ _U64(params.seeds[1])) | _U64(1)
    steps = np.arange(params.k_hashes, dtype=np.uint64)
    return (h1[:, None] + steps[None, :] * h2[:, None]) % _U64(params.m_cells)


# ------------------------
# Filters
# ------------------------
@dataclass
class BloomFilter:
    params: FilterParams
    bits: np.ndarray


@dataclass
class CountingBloomFilter:
    params: FilterParams
    counters: np.ndarray


@dataclass
class EmptyFilter:
    """Stand-in for a zero-capacity vector; contains only the empty query."""

    params: FilterParams


AnyFilter = Union[BloomFilter, CountingBloomFilter, EmptyFilter]


def new_bloom(params: FilterParams) -> AnyFilter:
    if params.is_empty:
        return EmptyFilter(params)
    return BloomFilter(params, np.zeros(params.m_cells, dtype=np.bool_))


def new_counting(params: FilterParams) -> AnyFilter:
    if params.is_empty:
        return EmptyFilter(params)
    return CountingBloomFilter(params, np.zeros(params.m_cells, dtype=np.uint16))


def freeze(f: AnyFilter) -> AnyFilter:
    if isinstance(f, BloomFilter):
        f.bits.setflags(write=False)
    elif isinstance(f, CountingBloomFilter):
        f.counters.setflags(write=False)
    return f


def bf_insert(f: BloomFilter, items) -> None:
    f.bits[probe_positions(f.params, items).ravel()] = True


def bf_query(f: AnyFilter, item: int) -> bool:
    if isinstance(f, EmptyFilter):
        return False
    return bool(f.bits[probe_positions(f.params, item)[0]].all())


def cbf_insert(f: CountingBloomFilter, items, mults=1) -> None:
    """Add each item with its multiplicity; counters saturate at 65535."""
    positions = probe_positions(f.params, items)
    mults = np.broadcast_to(np.asarray(mults, dtype=np.int64), (positions.shape[0],))
    if (mults < 1).any():
        raise ValueError("multiplicities must be >= 1")
    totals = f.counters.astype(np.int64)
    np.add.at(totals, positions.ravel(), np.repeat(mults, f.params.k_hashes))
    f.counters[:] = np.minimum(totals, COUNTER_MAX)


def cbf_count(f: AnyFilter, item: int) -> int:
    if isinstance(f, EmptyFilter):
        return 0
    return int(f.counters[probe_positions(f.params, item)[0]].min())


def build_bloom(items: Iterable[int], params: FilterParams) -> AnyFilter:
    f = new_bloom(params)
    items = np.asarray(list(items) if not isinstance(items, np.ndarray) else items, dtype=np.uint64)
    if isinstance(f, BloomFilter) and len(items):
        bf_insert(f, items)
    return freeze(f)


def build_counting(items, mults, params: FilterParams) -> AnyFilter:
    f = new_counting(params)
    items = np.asarray(items, dtype=np.uint64)
    if isinstance(f, CountingBloomFilter) and len(items):
        cbf_insert(f, items, np.asarray(mults, dtype=np.int64))
    return freeze(f)


# ------------------------
# Containment
# ------------------------
def _is_blank(f: AnyFilter) -> bool:
    if isinstance(f, EmptyFilter):
        return True
    if isinstance(f, BloomFilter):
        return not f.bits.any()
    return not f.counters.any()


def _check_params(container: AnyFilter, query: AnyFilter) -> None:
    a, b = container.params, query.params
    if (a.m_cells, a.k_hashes, a.seeds) != (b.m_cells, b.k_hashes, b.seeds):
        raise ParamMismatch(
            f"filter parameters differ: m={a.m_cells}/{b.m_cells} k={a.k_hashes}/{b.k_hashes} seeds equal={a.seeds == b.seeds}"
        )


def bf_contains_all(container: AnyFilter, query: AnyFilter) -> bool:
    """Every bit set in ``query`` is set in ``container``."""
    if _is_blank(query):
        return True
    if isinstance(container, EmptyFilter):
        return False
    _check_params(container, query)
    return not (query.bits & ~container.bits).any()


def cbf_contains_all(container: AnyFilter, query: AnyFilter) -> bool:
    """Every non-zero query counter is matched by a container counter at least as large."""
    if _is_blank(query):
        return True
    if isinstance(container, EmptyFilter):
        return False
    _check_params(container, query)
    return bool((container.counters >= query.counters).all())


def nbytes(f: AnyFilter) -> int:
    """Serialized size, header included."""
    if isinstance(f, BloomFilter):
        return _HEADER.size + (f.params.m_cells + 7) // 8
    if isinstance(f, CountingBloomFilter):
        return _HEADER.size + 2 * f.params.m_cells
    return _HEADER.size


# ------------------------
# Binary Layout
# ------------------------
def serialize_filter(f: AnyFilter) -> bytes:
    p = f.params
    if isinstance(f, BloomFilter):
        tag, payload = TYPE_BF, np.packbits(f.bits, bitorder="little").tobytes()
    elif isinstance(f, CountingBloomFilter):
        tag, payload = TYPE_CBF, f.counters.astype("<u2").tobytes()
    else:
        tag, payload = TYPE_EMPTY, b""
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, tag, p.capacity, p.epsilon, p.m_cells, p.k_hashes, *p.seeds)
    return header + payload


def deserialize_filter(buffer: bytes, offset: int = 0) -> Tuple[AnyFilter, int]:
    """Read one RIQF block at ``offset``; returns the filter and the next offset."""
    if len(buffer) - offset < _HEADER.size:
        raise CorruptIndex(f"truncated filter header at byte {offset}")
    magic, version, tag, capacity, epsilon, m_cells, k_hashes, seed_a, seed_b = _HEADER.unpack_from(buffer, offset)
    if magic != MAGIC:
        raise CorruptIndex(f"bad filter magic {magic!r} at byte {offset}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(version, FORMAT_VERSION)
    params = FilterParams(capacity, epsilon, m_cells, k_hashes, (seed_a, seed_b))
    start = offset + _HEADER.size

    if tag == TYPE_EMPTY:
        return EmptyFilter(params), start
    if tag == TYPE_BF:
        size = (m_cells + 7) // 8
    elif tag == TYPE_CBF:
        size = 2 * m_cells
    else:
        raise CorruptIndex(f"unknown filter type tag {tag} at byte {offset}")
    if len(buffer) - start < size:
        raise CorruptIndex(f"truncated filter payload at byte {start}: need {size} bytes")

    raw = np.frombuffer(buffer, dtype=np.uint8, count=size, offset=start)
    if tag == TYPE_BF:
        f = BloomFilter(params, np.unpackbits(raw, count=m_cells, bitorder="little").astype(np.bool_))
    else:
        f = CountingBloomFilter(params, raw.view("<u2").astype(np.uint16))
    return freeze(f), start + size
