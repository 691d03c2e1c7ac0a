import struct
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from riq.config import MERSENNE_61
from riq.errors import ConfigError, ParamMismatch
from riq.fingerprint import fingerprint
from riq.pattern_vectors import PATTERNS, PatternVector


# ------------------------
# Parameters
# ------------------------
@dataclass(frozen=True)
class LshParams:
    """k bands of l rows; row i is h(x) = (a_i x + b_i) mod u."""

    k: int
    l: int
    m: int
    u: int
    master_seed: int
    seeds: Tuple[Tuple[int, int], ...]

    def to_dict(self) -> dict:
        return {"k": self.k, "l": self.l, "m": self.m, "u": self.u, "master_seed": self.master_seed}

    @classmethod
    def from_dict(cls, data: dict) -> "LshParams":
        return make_lsh_params(int(data["k"]), int(data["l"]), int(data["m"]), int(data["u"]), int(data["master_seed"]))


def make_lsh_params(
    k: int = 5, l: int = 3, m: int = MERSENNE_61, u: int = MERSENNE_61, master_seed: int = 0
) -> LshParams:
    """Draw the k*l coefficient pairs deterministically from ``master_seed``."""
    if k < 1 or l < 1:
        raise ConfigError(f"LSH needs k >= 1 and l >= 1, got k={k} l={l}")
    if u <= 1 << 40:
        raise ConfigError(f"LSH modulus u must exceed 2^40, got {u}")
    rng = np.random.default_rng(master_seed)
    a = rng.integers(1, u, size=k * l, dtype=np.int64)
    b = rng.integers(0, u, size=k * l, dtype=np.int64)
    seeds = tuple((int(x), int(y)) for x, y in zip(a, b))
    return LshParams(k, l, m, u, master_seed, seeds)


# ------------------------
# Signatures
# ------------------------
@dataclass(frozen=True)
class LshSignature:
    """k band values in [0, m-1]; an empty ``values`` is the signature of an empty vector."""

    values: Tuple[int, ...]
    k: int

    @property
    def is_empty(self) -> bool:
        return not self.values


def empty_signature(params: LshParams) -> LshSignature:
    return LshSignature((), params.k)


def minhash_rows(params: LshParams, support: Iterable[int]) -> Tuple[int, ...]:
    """The k*l row minima g(S) = min h(x) over the distinct items of S."""
    items = sorted({int(x) for x in support})
    if not items:
        return ()
    # a*x needs up to 125 bits, so the arrays hold Python ints
    xs = np.array(items, dtype=object)
    a = np.array([s[0] for s in params.seeds], dtype=object)[:, None]
    b = np.array([s[1] for s in params.seeds], dtype=object)[:, None]
    minima = np.minimum.reduce((a * xs + b) % params.u, axis=1)
    return tuple(int(v) for v in minima)


def lsh_sign(params: LshParams, support: Iterable[int]) -> LshSignature:
    """Band the row minima into k values, fingerprinting each band of l rows into [0, m-1].

    Multiplicities are ignored: only the distinct support is hashed.
    """
    rows = minhash_rows(params, support)
    if not rows:
        return empty_signature(params)
    values = []
    for band in range(params.k):
        chunk = rows[band * params.l:(band + 1) * params.l]
        values.append(fingerprint(struct.pack(f">{params.l}Q", *chunk)) % params.m)
    return LshSignature(tuple(values), params.k)


def bands_collide(s1: LshSignature, s2: LshSignature) -> bool:
    """True when some band position holds the same value; empty signatures never collide."""
    if s1.k != s2.k or (s1.values and s2.values and len(s1.values) != len(s2.values)):
        raise ParamMismatch(f"signatures from different LSH parameters (k={s1.k} vs k={s2.k})")
    if s1.is_empty or s2.is_empty:
        return False
    return any(x == y for x, y in zip(s1.values, s2.values))


def pv_signatures(params: LshParams, pv: PatternVector) -> Tuple[LshSignature, ...]:
    """One signature per canonical pattern, in pattern order."""
    return tuple(lsh_sign(params, pv.fingerprints(pattern).tolist()) for pattern in PATTERNS)

