"""Multi-message signatures over BLS12-381 with selective-disclosure proofs."""

from .hashing import CIPHERSUITE_ID
from .scheme import (
    DEFAULT_MAX_MESSAGES,
    SIGNATURE_BYTES,
    EmptyMessageList,
    IndexOutOfRange,
    InvalidSignature,
    MalformedInput,
    MalformedProof,
    MultiSignature,
    SchemeError,
    SelectiveProof,
    SignerKeyPair,
    TooManyMessages,
    WeakSeed,
    derive_proof,
    keygen,
    proof_size,
    sign,
    verify,
    verify_proof,
)

__all__ = [
    "CIPHERSUITE_ID",
    "DEFAULT_MAX_MESSAGES",
    "SIGNATURE_BYTES",
    "EmptyMessageList",
    "IndexOutOfRange",
    "InvalidSignature",
    "MalformedInput",
    "MalformedProof",
    "MultiSignature",
    "SchemeError",
    "SelectiveProof",
    "SignerKeyPair",
    "TooManyMessages",
    "WeakSeed",
    "derive_proof",
    "keygen",
    "proof_size",
    "sign",
    "verify",
    "verify_proof",
]
