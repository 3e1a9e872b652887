"""Hashing to scalars and deterministic generator derivation.

Message bytes are mapped to scalars with expand_message_xmd (RFC 9380 style,
SHA-256) and reduction mod the group order. Message generators are derived
from a fixed seed by hash-and-increment onto the curve followed by cofactor
clearing; they are public constants, so the non-constant-time search is fine.
The ciphersuite identifier is baked into every domain-separation tag.
"""

from __future__ import annotations

import hashlib
import threading

from .curve import (
    B_G1,
    G1_H_EFF,
    P,
    R,
    FixedBase,
    fq_sqrt,
    g1_compress,
    g1_mul,
    mpz,
)

CIPHERSUITE_ID = b"FIELDSHARE-MMSIG-BLS12381G1-XMD:SHA-256-v1"

DST_MESSAGE = CIPHERSUITE_ID + b"-MSG"
DST_KEYGEN = CIPHERSUITE_ID + b"-KEYGEN"
DST_DOMAIN = CIPHERSUITE_ID + b"-DOMAIN"
DST_SIG_E = CIPHERSUITE_ID + b"-SIG-E"
DST_CHALLENGE = CIPHERSUITE_ID + b"-CHALLENGE"
DST_GENERATOR = CIPHERSUITE_ID + b"-GENERATOR"


def expand_message_xmd(msg: bytes, dst: bytes, length: int) -> bytes:
    """expand_message_xmd with SHA-256 (RFC 9380, section 5.3.1)."""
    if len(dst) > 255:
        dst = hashlib.sha256(b"H2C-OVERSIZE-DST-" + dst).digest()
    ell = (length + 31) // 32
    if ell > 255:
        raise ValueError("requested output too long")
    dst_prime = dst + bytes([len(dst)])
    b0 = hashlib.sha256(
        bytes(64) + msg + length.to_bytes(2, "big") + b"\x00" + dst_prime
    ).digest()
    blocks = [hashlib.sha256(b0 + b"\x01" + dst_prime).digest()]
    for i in range(2, ell + 1):
        mixed = bytes(x ^ y for x, y in zip(b0, blocks[-1]))
        blocks.append(hashlib.sha256(mixed + bytes([i]) + dst_prime).digest())
    return b"".join(blocks)[:length]


def hash_to_scalar(data: bytes, dst: bytes) -> int:
    """Uniform nonzero scalar mod the group order."""
    counter = 0
    while True:
        suffix = b"" if counter == 0 else counter.to_bytes(4, "big")
        out = int.from_bytes(expand_message_xmd(data + suffix, dst, 48), "big") % R
        if out:
            return out
        counter += 1


def message_to_scalar(message: bytes) -> int:
    return hash_to_scalar(message, DST_MESSAGE)


def _derive_generator(index: int):
    """Hash-and-increment onto the curve, then clear the cofactor."""
    ctr = 0
    while True:
        seed = index.to_bytes(4, "big") + ctr.to_bytes(4, "big")
        x = mpz(int.from_bytes(expand_message_xmd(seed, DST_GENERATOR, 48), "big") % P)
        y2 = (x * x % P * x + B_G1) % P
        y = fq_sqrt(y2)
        if y is not None:
            y = y if int(y) <= int(P - y) % P else (P - y) % P
            point = g1_mul((x, y), G1_H_EFF)
            if point is not None:
                return point
        ctr += 1


class GeneratorSet:
    """Lazily extended list of message generators with fixed-base tables.

    Index 0 is the domain generator; indexes 1..L are the message generators.
    The curve's base point (with its own table) anchors every commitment.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._points = []
        self._tables = []
        self._octets = []

    def ensure(self, count: int):
        with self._lock:
            if len(self._points) < count:
                missing = range(len(self._points), count)
                fresh = [_derive_generator(i) for i in missing]
                self._points.extend(fresh)
                self._tables.extend(FixedBase.build_many(fresh))
                self._octets.extend(g1_compress(pt) for pt in fresh)
            return (
                self._points[:count],
                self._tables[:count],
                self._octets[:count],
            )


GENERATORS = GeneratorSet()
