"""Minimal JOSE plumbing: ES256 compact JWS and P-256 JWKs.

Only what the credential layer needs: P-256 keys rendered as JWKs, compact
JWS signing/verification with the raw 64-byte r||s signature format, and the
RFC 7638 thumbprint used for key identifiers.
"""

from __future__ import annotations

import base64
import hashlib
import json

from cryptography.exceptions import InvalidSignature as _CryptoBadSig
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)


class JoseError(Exception):
    pass


class MalformedToken(JoseError):
    pass


class BadSignature(JoseError):
    pass


def b64url_encode(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64url_decode(text: str) -> bytes:
    if not isinstance(text, str):
        raise MalformedToken("expected base64url string")
    padding = -len(text) % 4
    try:
        return base64.urlsafe_b64decode(text + "=" * padding)
    except (ValueError, TypeError) as exc:
        raise MalformedToken(f"bad base64url data: {exc}") from exc


def generate_p256_key() -> ec.EllipticCurvePrivateKey:
    return ec.generate_private_key(ec.SECP256R1())


def _int_to_b64(value: int) -> str:
    return b64url_encode(value.to_bytes(32, "big"))


def jwk_from_key(key, kid: str | None = None) -> dict:
    """Public JWK for a P-256 private or public key."""
    public = key.public_key() if hasattr(key, "public_key") else key
    numbers = public.public_numbers()
    jwk = {
        "kty": "EC",
        "crv": "P-256",
        "x": _int_to_b64(numbers.x),
        "y": _int_to_b64(numbers.y),
    }
    if kid is not None:
        jwk["kid"] = kid
    return jwk


def public_key_from_jwk(jwk: dict) -> ec.EllipticCurvePublicKey:
    try:
        if jwk["kty"] != "EC" or jwk["crv"] != "P-256":
            raise MalformedToken("only EC P-256 JWKs are supported")
        x = int.from_bytes(b64url_decode(jwk["x"]), "big")
        y = int.from_bytes(b64url_decode(jwk["y"]), "big")
        return ec.EllipticCurvePublicNumbers(x, y, ec.SECP256R1()).public_key()
    except MalformedToken:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedToken(f"bad JWK: {exc}") from exc


def jwk_thumbprint(jwk: dict) -> str:
    """RFC 7638 SHA-256 thumbprint (EC required members only)."""
    canonical = json.dumps(
        {"crv": jwk["crv"], "kty": jwk["kty"], "x": jwk["x"], "y": jwk["y"]},
        separators=(",", ":"),
        sort_keys=True,
    )
    return b64url_encode(hashlib.sha256(canonical.encode("ascii")).digest())


def _segment(obj: dict) -> str:
    return b64url_encode(json.dumps(obj, separators=(",", ":")).encode("utf-8"))


def sign_compact(payload: dict, key, header: dict | None = None) -> str:
    """ES256 compact JWS over a JSON payload."""
    hdr = {"alg": "ES256", "typ": "JWT"}
    if header:
        hdr.update(header)
    signing_input = f"{_segment(hdr)}.{_segment(payload)}".encode("ascii")
    der = key.sign(signing_input, ec.ECDSA(hashes.SHA256()))
    r, s = decode_dss_signature(der)
    raw = r.to_bytes(32, "big") + s.to_bytes(32, "big")
    return signing_input.decode("ascii") + "." + b64url_encode(raw)


def peek_compact(token: str) -> tuple:
    """Decode header and payload without verifying the signature."""
    try:
        header_b64, payload_b64, _ = token.split(".")
        header = json.loads(b64url_decode(header_b64))
        payload = json.loads(b64url_decode(payload_b64))
    except (ValueError, AttributeError) as exc:
        raise MalformedToken(f"not a compact JWS: {exc}") from exc
    if not isinstance(header, dict) or not isinstance(payload, dict):
        raise MalformedToken("JWS header/payload must be JSON objects")
    return header, payload


def verify_compact(token: str, public_key) -> tuple:
    """Verify an ES256 compact JWS; returns (header, payload)."""
    header, payload = peek_compact(token)
    if header.get("alg") != "ES256":
        raise BadSignature(f"unsupported alg {header.get('alg')!r}")
    try:
        header_b64, payload_b64, sig_b64 = token.split(".")
        raw = b64url_decode(sig_b64)
        if len(raw) != 64:
            raise MalformedToken("ES256 signature must be 64 bytes")
        der = encode_dss_signature(
            int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big")
        )
        public_key.verify(
            der,
            f"{header_b64}.{payload_b64}".encode("ascii"),
            ec.ECDSA(hashes.SHA256()),
        )
    except MalformedToken:
        raise
    except (_CryptoBadSig, ValueError) as exc:
        raise BadSignature("JWS signature check failed") from exc
    return header, payload
