from pathlib import Path

import numpy as np
import pytest

from riq.fingerprint import (
    RabinConfig,
    encode_masked,
    encode_term,
    fingerprint,
    fingerprint_many,
    masked_fingerprint,
)
from riq.pattern_vectors import CanonicalPattern
from riq.rdf_core import Term

VECTORS = Path(__file__).with_name("fingerprint_vectors.tsv")
POLY = (1 << 64) | 0x1B


def reference(data: bytes) -> int:
    """Bitwise long division of 1·t^(8n) + M(t) by the polynomial."""
    value = int.from_bytes(b"\x01" + data, "big")
    while value.bit_length() > 64:
        value ^= POLY << (value.bit_length() - 65)
    return value


def load_vectors():
    rows = []
    for line in VECTORS.read_text().splitlines():
        if line.startswith("#"):
            continue
        data, expected = line.split("\t")
        rows.append((bytes.fromhex(data), int(expected, 16)))
    return rows


@pytest.mark.parametrize("data,expected", load_vectors())
def test_golden_vectors(data, expected):
    assert fingerprint(data) == expected
    assert reference(data) == expected


def test_empty_input_is_one():
    assert fingerprint(b"") == 1


def test_leading_zero_bytes_are_significant():
    assert fingerprint(b"\x00") != fingerprint(b"")
    assert fingerprint(b"\x00abc") != fingerprint(b"abc")


def test_matches_long_division_on_random_inputs(rng):
    for _ in range(300):
        data = rng.bytes(int(rng.integers(0, 64)))
        assert fingerprint(data) == reference(data)


def test_fingerprint_many_matches_scalar():
    items = [b"", b"a", b"hello world", bytes(range(40))]
    out = fingerprint_many(items)
    assert out.dtype == np.uint64
    assert [int(x) for x in out] == [fingerprint(x) for x in items]


def test_rabin_config_round_trip():
    config = RabinConfig()
    assert config.to_dict() == {"polynomial": "0x000000000000001b", "width": 64}
    assert RabinConfig.from_dict(config.to_dict()) == config


# ------------------------
# Canonical Encodings
# ------------------------
def test_encode_term_kinds():
    assert encode_term(Term.iri("http://x")) == b"Ihttp://x"
    assert encode_term(Term.blank("b0")) == b"Bb0"
    assert encode_term(Term.literal("v")) == b"Lv"
    assert encode_term(Term.literal("v", language="en")) == b"Lv\x1e@en"
    assert encode_term(Term.literal("1", datatype="http://dt")) == b"L1\x1e^http://dt"


def test_encode_term_escapes_separators():
    assert encode_term(Term.literal("a\x1fb")) == b"La\x1d\x1fb"
    assert encode_term(Term.literal("a\x1db")) == b"La\x1d\x1db"
    assert encode_term(Term.literal("a\x1e")) != encode_term(Term.literal("a", language=""))


def test_encoding_distinguishes_term_kinds():
    assert encode_term(Term.iri("x")) != encode_term(Term.literal("x"))
    assert encode_term(Term.literal("x")) != encode_term(Term.literal("x", datatype="http://www.w3.org/2001/XMLSchema#string"))


def test_encode_masked_layout():
    p = Term.iri("http://p")
    encoded = encode_masked(CanonicalPattern.xPx.tag, (None, p, None))
    assert encoded == bytes([0x35]) + b"\x1f?\x1fIhttp://p\x1f?"


def test_pattern_tag_separates_masks():
    s = Term.iri("http://s")
    assert masked_fingerprint(CanonicalPattern.Sxx.tag, s, None, None) != masked_fingerprint(
        CanonicalPattern.SPO.tag, s, None, None
    )


# ------------------------
# Distribution
# ------------------------
@pytest.mark.slow
def test_no_collisions_on_random_strings():
    rng = np.random.default_rng(2024)
    items = {rng.bytes(16) for _ in range(1_000_000)}
    fps = fingerprint_many(items)
    assert len(np.unique(fps)) == len(items)


@pytest.mark.slow
def test_output_bits_are_balanced():
    rng = np.random.default_rng(99)
    fps = fingerprint_many(rng.bytes(24) for _ in range(100_000))
    bits = (fps[:, None] >> np.arange(64, dtype=np.uint64)[None, :]) & np.uint64(1)
    freq = bits.mean(axis=0)
    assert np.all(np.abs(freq - 0.5) <= 0.02)
