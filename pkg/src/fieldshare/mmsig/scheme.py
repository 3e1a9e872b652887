"""Multi-message signatures with selective-disclosure proofs.

One constant-size signature (80 bytes) covers an ordered array of byte-string
messages. Anyone holding the signature and the full message array can derive a
proof that reveals an arbitrary sub-array while keeping the rest hidden; the
proof verifies against the signer's public key, the revealed messages at their
original indices, and a presentation nonce that binds the proof to one
response. Proof size is affine in the number of hidden messages.

Scheme shape (signature (A, e) with A = B / (sk + e), B a commitment to all
message scalars; proofs are Schnorr-style over the randomized pair
Abar = A*r1*r2, Bbar = Abar*sk) follows the standardized multi-message
signature construction over BLS12-381.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from functools import lru_cache

from . import hashing
from .curve import (
    G1_GEN,
    G2_GEN,
    R,
    FixedBase,
    g1_add,
    g1_batch_affine,
    g1_compress,
    g1_decompress,
    g1_in_subgroup,
    g1_neg,
    g1_neg_jac,
    g1_to_affine,
    g2_compress,
    g2_decompress,
    g2_in_subgroup,
    g2_mul,
    msm_fixed,
    msm_var,
)
from .pairing import pairing_check, prepare_g2

DEFAULT_MAX_MESSAGES = 1024
SIGNATURE_BYTES = 80  # 48-byte G1 point + 32-byte scalar
PROOF_BASE_BYTES = 3 * 48 + 4 * 32  # three points + (e^, r1^, r3^, challenge)
PROOF_PER_HIDDEN_BYTES = 32


class SchemeError(Exception):
    """Base class for signature-scheme failures."""


class WeakSeed(SchemeError):
    """Key seed carries fewer than 32 bytes."""


class EmptyMessageList(SchemeError):
    pass


class TooManyMessages(SchemeError):
    pass


class IndexOutOfRange(SchemeError):
    pass


class InvalidSignature(SchemeError):
    """Signature failed verification before proof derivation."""


class MalformedInput(SchemeError):
    """Structurally invalid key, signature, or argument."""


class MalformedProof(SchemeError):
    """Proof bytes do not match the declared structure."""


@dataclass(frozen=True)
class SignerKeyPair:
    secret_key: int
    public_key: bytes  # compressed G2 point
    key_id: str


@dataclass(frozen=True)
class MultiSignature:
    data: bytes
    message_count: int

    def __post_init__(self):
        if len(self.data) != SIGNATURE_BYTES:
            raise MalformedInput("signature must be 80 bytes")


@dataclass(frozen=True)
class SelectiveProof:
    data: bytes
    revealed_indices: tuple
    total_count: int
    presentation_nonce: bytes


def proof_size(total_count: int, revealed_count: int) -> int:
    return PROOF_BASE_BYTES + PROOF_PER_HIDDEN_BYTES * (total_count - revealed_count)


def keygen(seed: bytes | None = None, key_id: str | None = None) -> SignerKeyPair:
    """Generate a signing key pair, deterministically when a seed is given."""
    if seed is not None:
        if len(seed) < 32:
            raise WeakSeed("seed must carry at least 32 bytes")
        sk = hashing.hash_to_scalar(seed, hashing.DST_KEYGEN)
    else:
        sk = 1 + secrets.randbelow(int(R) - 1)
    pk = g2_compress(g2_mul(G2_GEN, sk))
    if key_id is None:
        key_id = hashlib.sha256(pk).hexdigest()[:16]
    return SignerKeyPair(secret_key=sk, public_key=pk, key_id=key_id)


def _scalar_bytes(k: int) -> bytes:
    return int(k).to_bytes(32, "big")


def _bases(count: int):
    """[base point, domain generator, message generators...] with tables."""
    points, tables, octets = hashing.GENERATORS.ensure(count + 1)
    return points, tables, octets


@lru_cache(maxsize=64)
def _base_table():
    return FixedBase.build_many([G1_GEN])[0]


@lru_cache(maxsize=1024)
def _domain_scalar(public_key: bytes, count: int) -> int:
    _, _, octets = _bases(count)
    payload = b"".join(
        [public_key, count.to_bytes(8, "big"), g1_compress(G1_GEN), *octets]
    )
    return hashing.hash_to_scalar(payload, hashing.DST_DOMAIN)


@lru_cache(maxsize=32)
def _prepared_pk(public_key: bytes):
    """Decode + subgroup-check a public key and precompute its pairing lines."""
    try:
        w = g2_decompress(public_key)
    except ValueError as exc:
        raise MalformedInput(f"bad public key: {exc}") from exc
    if w is None or not g2_in_subgroup(w):
        raise MalformedInput("public key not in the prime-order subgroup")
    return prepare_g2(w)


@lru_cache(maxsize=1)
def _prepared_base_g2():
    return prepare_g2(G2_GEN)


def message_scalars(messages) -> list:
    return [hashing.message_to_scalar(m) for m in messages]


def _commitment(domain: int, scalars, count: int):
    """B = P1 + Q*domain + sum H_i * m_i as a Jacobian point."""
    _, tables, _ = _bases(count)
    return msm_fixed(
        [_base_table(), tables[0], *tables[1 : count + 1]],
        [1, domain, *scalars],
    )


def _check_messages(messages, max_messages: int):
    if len(messages) == 0:
        raise EmptyMessageList("need at least one message")
    if len(messages) > max_messages:
        raise TooManyMessages(f"{len(messages)} messages exceeds {max_messages}")
    for m in messages:
        if not isinstance(m, (bytes, bytearray)):
            raise MalformedInput("messages must be byte strings")


def sign(key, messages, max_messages: int = DEFAULT_MAX_MESSAGES) -> MultiSignature:
    """Sign an ordered list of byte-string messages with one 80-byte signature."""
    sk = key.secret_key if isinstance(key, SignerKeyPair) else int(key)
    pk = (
        key.public_key
        if isinstance(key, SignerKeyPair)
        else g2_compress(g2_mul(G2_GEN, sk))
    )
    _check_messages(messages, max_messages)
    count = len(messages)
    scalars = message_scalars(messages)
    domain = _domain_scalar(pk, count)

    digest = hashlib.sha256()
    for m in messages:
        digest.update(len(m).to_bytes(8, "big"))
        digest.update(m)
    e_seed = _scalar_bytes(sk) + _scalar_bytes(domain) + digest.digest()
    e = hashing.hash_to_scalar(e_seed, hashing.DST_SIG_E)
    while (sk + e) % R == 0:  # vanishing denominator: astronomically unlikely
        e_seed += b"\x00"
        e = hashing.hash_to_scalar(e_seed, hashing.DST_SIG_E)

    b_point = g1_to_affine(_commitment(domain, scalars, count))
    a_point = g1_to_affine(msm_var([b_point], [pow((sk + e) % R, -1, int(R))]))
    return MultiSignature(
        data=g1_compress(a_point) + _scalar_bytes(e), message_count=count
    )


def _verify_core(public_key, scalars, sig):
    """Shared verify path; returns (ok, A affine, e, B jacobian)."""
    count = len(scalars)
    if sig.message_count != count:
        return False, None, None, None
    try:
        a_point = g1_decompress(sig.data[:48])
    except ValueError:
        return False, None, None, None
    if a_point is None or not g1_in_subgroup(a_point):
        return False, None, None, None
    e = int.from_bytes(sig.data[48:], "big")
    if e >= R:
        return False, None, None, None
    domain = _domain_scalar(public_key, count)
    b_jac = _commitment(domain, scalars, count)
    w_prep = _prepared_pk(public_key)
    # e(A, W) * e(e*A - B, P2) == 1  <=>  e(A, W + e*P2) == e(B, P2)
    ea_minus_b = g1_to_affine(g1_add(msm_var([a_point], [e]), g1_neg_jac(b_jac)))
    ok = pairing_check(
        [(a_point, w_prep), (ea_minus_b, _prepared_base_g2())]
    )
    return ok, a_point, e, b_jac


def verify(public_key: bytes, messages, sig: MultiSignature) -> bool:
    """True iff sig covers exactly this ordered message list under this key."""
    if not isinstance(sig, MultiSignature):
        raise MalformedInput("sig must be a MultiSignature")
    if not messages:
        return False
    for m in messages:
        if not isinstance(m, (bytes, bytearray)):
            raise MalformedInput("messages must be byte strings")
    ok, _, _, _ = _verify_core(public_key, message_scalars(messages), sig)
    return ok


def _rand_scalar() -> int:
    return 1 + secrets.randbelow(int(R) - 1)


def _challenge(
    points5: bytes,
    revealed_indices,
    disclosed_scalars,
    total_count: int,
    domain: int,
    nonce: bytes,
) -> int:
    h = hashlib.sha256()
    h.update(points5)
    h.update(total_count.to_bytes(8, "big"))
    h.update(len(revealed_indices).to_bytes(8, "big"))
    for i in revealed_indices:
        h.update(int(i).to_bytes(8, "big"))
    for s in disclosed_scalars:
        h.update(_scalar_bytes(s))
    h.update(_scalar_bytes(domain))
    h.update(len(nonce).to_bytes(8, "big"))
    h.update(nonce)
    return hashing.hash_to_scalar(h.digest(), hashing.DST_CHALLENGE)


def derive_proof(
    public_key: bytes,
    sig: MultiSignature,
    messages,
    revealed_indices,
    presentation_nonce: bytes,
) -> SelectiveProof:
    """Prove knowledge of a valid signature, revealing only the chosen indices."""
    if not presentation_nonce:
        raise MalformedInput("presentation nonce must be non-empty")
    count = len(messages)
    revealed = tuple(sorted(set(int(i) for i in revealed_indices)))
    if revealed and (revealed[0] < 0 or revealed[-1] >= count):
        raise IndexOutOfRange(f"revealed indices outside [0, {count})")
    scalars = message_scalars(messages)
    ok, a_point, e, b_jac = _verify_core(public_key, scalars, sig)
    if not ok:
        raise InvalidSignature("signature does not verify over these messages")

    revealed_set = set(revealed)
    hidden = [i for i in range(count) if i not in revealed_set]
    domain = _domain_scalar(public_key, count)
    _, tables, _ = _bases(count)

    r1 = _rand_scalar()
    r2 = _rand_scalar()
    r3 = pow(r2, -1, int(R))
    e_t = _rand_scalar()
    r1_t = _rand_scalar()
    r3_t = _rand_scalar()
    m_t = {j: _rand_scalar() for j in hidden}

    b_aff = g1_to_affine(b_jac)
    abar_j = msm_var([a_point], [r1 * r2 % R])
    d_j = msm_var([b_aff], [r2])
    abar, d_aff = g1_batch_affine([abar_j, d_j])
    bbar_j = msm_var([d_aff, abar], [r1, (R - e) % R])
    t1_j = msm_var([abar, d_aff], [e_t, r1_t])
    t2_j = g1_add(
        msm_var([d_aff], [r3_t]),
        msm_fixed([tables[1 + j] for j in hidden], [m_t[j] for j in hidden]),
    )
    bbar, t1_aff, t2_aff = g1_batch_affine([bbar_j, t1_j, t2_j])

    points5 = b"".join(
        g1_compress(pt) for pt in (abar, bbar, d_aff, t1_aff, t2_aff)
    )
    disclosed = [scalars[i] for i in revealed]
    c = _challenge(points5, revealed, disclosed, count, domain, presentation_nonce)

    e_hat = (e_t + c * e) % R
    r1_hat = (r1_t - c * r1) % R
    r3_hat = (r3_t - c * r3) % R
    m_hats = [(m_t[j] + c * scalars[j]) % R for j in hidden]

    data = b"".join(
        [
            g1_compress(abar),
            g1_compress(bbar),
            g1_compress(d_aff),
            _scalar_bytes(e_hat),
            _scalar_bytes(r1_hat),
            _scalar_bytes(r3_hat),
            *[_scalar_bytes(m) for m in m_hats],
            _scalar_bytes(c),
        ]
    )
    return SelectiveProof(
        data=data,
        revealed_indices=revealed,
        total_count=count,
        presentation_nonce=bytes(presentation_nonce),
    )


def verify_proof(
    public_key: bytes,
    proof: SelectiveProof,
    revealed: dict,
    presentation_nonce: bytes,
) -> bool:
    """Check a selective-disclosure proof against revealed index->bytes messages.

    Returns False on any cryptographic or consistency failure; raises
    MalformedProof only when the byte structure cannot be parsed at all.
    """
    total = int(proof.total_count)
    indices = tuple(sorted(set(int(i) for i in proof.revealed_indices)))
    if total <= 0 or len(indices) > total:
        raise MalformedProof("impossible revealed/total structure")
    hidden_count = total - len(indices)
    expected_len = PROOF_BASE_BYTES + PROOF_PER_HIDDEN_BYTES * hidden_count
    if len(proof.data) != expected_len:
        raise MalformedProof(
            f"proof is {len(proof.data)} bytes, expected {expected_len}"
        )
    if indices and (indices[0] < 0 or indices[-1] >= total):
        return False
    if set(revealed.keys()) != set(indices):
        return False
    if indices != tuple(proof.revealed_indices):
        return False

    data = proof.data
    try:
        abar = g1_decompress(data[0:48])
        bbar = g1_decompress(data[48:96])
        d_aff = g1_decompress(data[96:144])
    except ValueError:
        return False
    if abar is None or bbar is None or d_aff is None:
        return False
    for pt in (abar, bbar, d_aff):
        if not g1_in_subgroup(pt):
            return False
    off = 144
    e_hat = int.from_bytes(data[off : off + 32], "big")
    r1_hat = int.from_bytes(data[off + 32 : off + 64], "big")
    r3_hat = int.from_bytes(data[off + 64 : off + 96], "big")
    off += 96
    m_hats = []
    for _ in range(hidden_count):
        m_hats.append(int.from_bytes(data[off : off + 32], "big"))
        off += 32
    c = int.from_bytes(data[off : off + 32], "big")
    if any(s >= R for s in (e_hat, r1_hat, r3_hat, c)) or any(
        s >= R for s in m_hats
    ):
        return False

    disclosed = {}
    for i in indices:
        m = revealed[i]
        if not isinstance(m, (bytes, bytearray)):
            return False
        disclosed[i] = hashing.message_to_scalar(bytes(m))

    domain = _domain_scalar(public_key, total)
    _, tables, _ = _bases(total)
    index_set = set(indices)
    hidden = [j for j in range(total) if j not in index_set]

    t1_j = msm_var([bbar, abar, d_aff], [c, e_hat, r1_hat])
    # T2 = c*Bv + r3^*D + sum_hidden m^_j*H_j with Bv folded into one fixed MSM
    fixed_bases = [
        _base_table(),
        tables[0],
        *[tables[1 + i] for i in indices],
        *[tables[1 + j] for j in hidden],
    ]
    fixed_scalars = [
        c,
        c * domain % R,
        *[c * disclosed[i] % R for i in indices],
        *m_hats,
    ]
    t2_j = g1_add(
        msm_var([d_aff], [r3_hat]), msm_fixed(fixed_bases, fixed_scalars)
    )
    t1_aff, t2_aff = g1_batch_affine([t1_j, t2_j])
    if t1_aff is None or t2_aff is None:
        return False

    points5 = b"".join(
        g1_compress(pt) for pt in (abar, bbar, d_aff, t1_aff, t2_aff)
    )
    expected_c = _challenge(
        points5,
        indices,
        [disclosed[i] for i in indices],
        total,
        domain,
        presentation_nonce or b"",
    )
    if expected_c != c:
        return False

    try:
        w_prep = _prepared_pk(public_key)
    except MalformedInput:
        return False
    return pairing_check([(abar, w_prep), (g1_neg(bbar), _prepared_base_g2())])
