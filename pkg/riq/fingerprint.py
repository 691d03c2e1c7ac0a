from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence

import numpy as np

from riq.rdf_core import Term, TermKind

# t^64 + t^4 + t^3 + t + 1; the t^64 term is implicit.
RABIN_POLYNOMIAL = 0x1B
RABIN_WIDTH = 64
_MASK64 = (1 << 64) - 1

FIELD_SEPARATOR = b"\x1f"
SUFFIX_SEPARATOR = b"\x1e"
ESCAPE = b"\x1d"
WILDCARD = b"?"

_KIND_BYTES = {
    TermKind.IRI: b"I",
    TermKind.LITERAL: b"L",
    TermKind.BLANK: b"B",
}


@dataclass(frozen=True)
class RabinConfig:
    """Fingerprint polynomial recorded in every index manifest."""

    polynomial: int = RABIN_POLYNOMIAL
    width: int = RABIN_WIDTH

    def to_dict(self) -> dict:
        return {"polynomial": f"{self.polynomial:#018x}", "width": self.width}

    @classmethod
    def from_dict(cls, data: dict) -> "RabinConfig":
        return cls(polynomial=int(data["polynomial"], 16), width=int(data["width"]))


def _build_table(polynomial: int) -> List[int]:
    # shifted[i] = t^(64+i) mod P
    shifted = []
    value = polynomial
    for _ in range(8):
        shifted.append(value)
        carry = value >> 63
        value = (value << 1) & _MASK64
        if carry:
            value ^= polynomial
    table = []
    for j in range(256):
        entry = 0
        for bit in range(8):
            if j >> bit & 1:
                entry ^= shifted[bit]
        table.append(entry)
    return table


_TABLE = _build_table(RABIN_POLYNOMIAL)


# ------------------------
# Fingerprinting
# ------------------------
def fingerprint(data: bytes) -> int:
    """Rabin fingerprint (t^(8n) + M(t)) mod P(t) of an n-byte message M.

    The implicit leading 1 keeps leading zero bytes significant, so
    fingerprint(b"") == 1 and fingerprint(b"\\x00") == 0x100.
    """
    table = _TABLE
    fp = 1
    for byte in data:
        fp = (((fp << 8) & _MASK64) | byte) ^ table[fp >> 56]
    return fp


def fingerprint_many(items: Iterable[bytes]) -> np.ndarray:
    return np.fromiter((fingerprint(item) for item in items), dtype=np.uint64)


# ------------------------
# Canonical Encodings
# ------------------------
def _escape(text: str) -> bytes:
    raw = text.encode("utf-8")
    if b"\x1d" in raw or b"\x1e" in raw or b"\x1f" in raw:
        raw = (
            raw.replace(ESCAPE, ESCAPE + ESCAPE)
            .replace(SUFFIX_SEPARATOR, ESCAPE + SUFFIX_SEPARATOR)
            .replace(FIELD_SEPARATOR, ESCAPE + FIELD_SEPARATOR)
        )
    return raw


@lru_cache(maxsize=1 << 18)
def encode_term(term: Term) -> bytes:
    """kind byte ++ lexical ++ optional (0x1E ++ '^'datatype | '@'language)."""
    encoded = _KIND_BYTES[term.kind] + _escape(term.lexical)
    if term.datatype is not None:
        encoded += SUFFIX_SEPARATOR + b"^" + _escape(term.datatype)
    elif term.language is not None:
        encoded += SUFFIX_SEPARATOR + b"@" + _escape(term.language)
    return encoded


def encode_masked(tag: int, fields: Sequence[Optional[Term]]) -> bytes:
    """Encode a masked triple; None fields are the wildcard ``?``."""
    parts = [bytes((tag,))]
    for term in fields:
        parts.append(WILDCARD if term is None else encode_term(term))
    return FIELD_SEPARATOR.join(parts)


@lru_cache(maxsize=1 << 20)
def masked_fingerprint(tag: int, subject: Optional[Term], predicate: Optional[Term], obj: Optional[Term]) -> int:
    return fingerprint(encode_masked(tag, (subject, predicate, obj)))
