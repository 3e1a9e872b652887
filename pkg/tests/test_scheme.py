import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldshare import mmsig

KP = mmsig.keygen(seed=b"scheme-test-seed-0123456789abcdef")
MSGS = [f"leaf-{i}".encode() for i in range(7)]
SIG = mmsig.sign(KP, MSGS)
NONCE = b"presentation-nonce"


def test_keygen_determinism_and_freshness():
    again = mmsig.keygen(seed=b"scheme-test-seed-0123456789abcdef")
    assert again == KP
    assert mmsig.keygen().public_key != mmsig.keygen().public_key


def test_keygen_weak_seed():
    with pytest.raises(mmsig.WeakSeed):
        mmsig.keygen(seed=b"short")


def test_sign_verify_roundtrip():
    assert mmsig.verify(KP.public_key, MSGS, SIG)


def test_verify_rejects_tampered_message():
    bad = list(MSGS)
    bad[3] = bytes([bad[3][0] ^ 1]) + bad[3][1:]
    assert not mmsig.verify(KP.public_key, bad, SIG)


def test_verify_rejects_reordering():
    assert not mmsig.verify(KP.public_key, list(reversed(MSGS)), SIG)


def test_verify_rejects_wrong_key():
    other = mmsig.keygen(seed=b"another-seed-another-seed-anothe")
    assert not mmsig.verify(other.public_key, MSGS, SIG)


def test_verify_rejects_wrong_count():
    assert not mmsig.verify(KP.public_key, MSGS[:-1], SIG)


def test_sign_input_validation():
    with pytest.raises(mmsig.EmptyMessageList):
        mmsig.sign(KP, [])
    with pytest.raises(mmsig.TooManyMessages):
        mmsig.sign(KP, [b"x"] * 10, max_messages=5)
    with pytest.raises(mmsig.MalformedInput):
        mmsig.sign(KP, ["not-bytes"])


def test_signature_size_constant():
    one = mmsig.sign(KP, [b"only"])
    thousand = mmsig.sign(KP, [b"m%d" % i for i in range(1000)])
    assert len(one.data) == len(thousand.data) == mmsig.SIGNATURE_BYTES


def test_proof_roundtrip_and_errors():
    proof = mmsig.derive_proof(KP.public_key, SIG, MSGS, [0, 3], NONCE)
    assert mmsig.verify_proof(
        KP.public_key, proof, {0: MSGS[0], 3: MSGS[3]}, NONCE
    )
    with pytest.raises(mmsig.IndexOutOfRange):
        mmsig.derive_proof(KP.public_key, SIG, MSGS, [99], NONCE)
    with pytest.raises(mmsig.MalformedInput):
        mmsig.derive_proof(KP.public_key, SIG, MSGS, [0], b"")
    broken = mmsig.MultiSignature(data=bytes(80), message_count=len(MSGS))
    with pytest.raises(mmsig.InvalidSignature):
        mmsig.derive_proof(KP.public_key, broken, MSGS, [0], NONCE)


def test_reveal_all_and_none():
    everything = mmsig.derive_proof(KP.public_key, SIG, MSGS, range(7), NONCE)
    assert mmsig.verify_proof(
        KP.public_key, everything, {i: MSGS[i] for i in range(7)}, NONCE
    )
    nothing = mmsig.derive_proof(KP.public_key, SIG, MSGS, [], NONCE)
    assert mmsig.verify_proof(KP.public_key, nothing, {}, NONCE)


def test_nonce_binding():
    proof = mmsig.derive_proof(KP.public_key, SIG, MSGS, [1], NONCE)
    assert not mmsig.verify_proof(KP.public_key, proof, {1: MSGS[1]}, b"replayed")


def test_proof_size_law():
    sizes = []
    for k in range(len(MSGS) + 1):
        proof = mmsig.derive_proof(KP.public_key, SIG, MSGS, range(k), NONCE)
        assert len(proof.data) == mmsig.proof_size(len(MSGS), k)
        sizes.append(len(proof.data))
    assert sizes == sorted(sizes, reverse=True)
    deltas = {sizes[i] - sizes[i + 1] for i in range(len(sizes) - 1)}
    assert deltas == {32}  # affine in the hidden count


@settings(max_examples=15, deadline=None)
@given(data=st.data())
def test_completeness(data):
    n = data.draw(st.integers(1, 8))
    messages = [
        data.draw(st.binary(min_size=0, max_size=16), label=f"m{i}")
        for i in range(n)
    ]
    revealed = sorted(
        data.draw(st.sets(st.integers(0, n - 1), max_size=n), label="revealed")
    )
    nonce = data.draw(st.binary(min_size=1, max_size=16), label="nonce")
    sig = mmsig.sign(KP, messages)
    proof = mmsig.derive_proof(KP.public_key, sig, messages, revealed, nonce)
    assert mmsig.verify_proof(
        KP.public_key, proof, {i: messages[i] for i in revealed}, nonce
    )


def test_splicing_rejected():
    other_msgs = [f"other-{i}".encode() for i in range(7)]
    other_sig = mmsig.sign(KP, other_msgs)
    assert mmsig.verify(KP.public_key, other_msgs, other_sig)
    proof = mmsig.derive_proof(KP.public_key, SIG, MSGS, [2, 4], NONCE)
    # present a message from the *other* signed document at a revealed slot
    assert not mmsig.verify_proof(
        KP.public_key, proof, {2: other_msgs[2], 4: MSGS[4]}, NONCE
    )


def test_malformed_proof_structure():
    proof = mmsig.derive_proof(KP.public_key, SIG, MSGS, [0], NONCE)
    truncated = mmsig.SelectiveProof(
        data=proof.data[:-1],
        revealed_indices=proof.revealed_indices,
        total_count=proof.total_count,
        presentation_nonce=proof.presentation_nonce,
    )
    with pytest.raises(mmsig.MalformedProof):
        mmsig.verify_proof(KP.public_key, truncated, {0: MSGS[0]}, NONCE)


def test_bit_flip_fuzz():
    rng = random.Random(99)
    proof = mmsig.derive_proof(KP.public_key, SIG, MSGS, [1, 5], NONCE)
    revealed = {1: MSGS[1], 5: MSGS[5]}
    assert mmsig.verify_proof(KP.public_key, proof, revealed, NONCE)

    # proof byte mutations (sampled positions plus every field boundary)
    positions = {0, 48, 96, 144, 176, 208, 240, len(proof.data) - 1}
    positions.update(rng.randrange(len(proof.data)) for _ in range(24))
    for pos in sorted(positions):
        mutated = bytearray(proof.data)
        mutated[pos] ^= 1 << rng.randrange(8)
        flipped = mmsig.SelectiveProof(
            data=bytes(mutated),
            revealed_indices=proof.revealed_indices,
            total_count=proof.total_count,
            presentation_nonce=proof.presentation_nonce,
        )
        assert not mmsig.verify_proof(KP.public_key, flipped, revealed, NONCE), pos

    # revealed-message mutations
    for idx in revealed:
        dirty = dict(revealed)
        dirty[idx] = bytes([revealed[idx][0] ^ 0x80]) + revealed[idx][1:]
        assert not mmsig.verify_proof(KP.public_key, proof, dirty, NONCE)

    # index substitution: same bytes presented at a different index
    swapped = mmsig.SelectiveProof(
        data=proof.data,
        revealed_indices=(1, 6),
        total_count=proof.total_count,
        presentation_nonce=proof.presentation_nonce,
    )
    assert not mmsig.verify_proof(
        KP.public_key, swapped, {1: MSGS[1], 6: MSGS[5]}, NONCE
    )

    # nonce mutation
    assert not mmsig.verify_proof(KP.public_key, proof, revealed, NONCE + b"\x00")
