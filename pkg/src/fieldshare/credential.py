"""Capability credentials, status-list revocation, and DPoP proofs.

A capability credential is a JWT asserting which measurement fields of which
devices its holder may read. It binds the holder's public key (``cnf``),
carries the owner as audience, and points at a revocation status list: a
bitstring where bit i set means the credential with revocation index i is
revoked. Proof of key possession travels as a DPoP JWS bound to one HTTP
method and URI, replay-protected by a nonce cache.
"""

from __future__ import annotations

import gzip
import json
import secrets
import threading
from dataclasses import dataclass, field
from urllib.parse import urlsplit, urlunsplit

from . import jose

CONTEXT_CREDENTIALS = "https://www.w3.org/2018/credentials/v1"
CONTEXT_CAPABILITIES = "https://mm.aueb.gr/contexts/capabilities/v1"
TYPE_VERIFIABLE_CREDENTIAL = "VerifiableCredential"
TYPE_CAPABILITIES_CREDENTIAL = "CapabilitiesCredential"
STATUS_ENTRY_TYPE = "RevocationList2020Status"

# verification outcome reasons (HTTP layers map these to status codes)
EXPIRED = "Expired"
BAD_SIGNATURE = "BadSignature"
UNTRUSTED_ISSUER = "UntrustedIssuer"
STALE = "Stale"
REPLAYED = "Replayed"
METHOD_MISMATCH = "MethodMismatch"
URI_MISMATCH = "UriMismatch"

DPOP_FRESHNESS_SECONDS = 60
DPOP_REPLAY_HORIZON_SECONDS = 120


class CredentialError(Exception):
    pass


class InvalidClaims(CredentialError):
    pass


class MalformedCredential(CredentialError):
    pass


class IndexOutOfRange(CredentialError):
    pass


@dataclass(frozen=True)
class CapabilityVC:
    jti: str
    iss: str
    aud: str
    iat: int
    exp: int
    cnf_jwk: dict
    capabilities: dict  # device id -> list of field names
    revocation_list_index: int
    status_list_url: str

    def validate(self):
        if not (self.jti and self.iss and self.aud):
            raise InvalidClaims("jti, iss, and aud must be non-empty")
        if not self.iat < self.exp:
            raise InvalidClaims("iat must precede exp")
        if not self.capabilities:
            raise InvalidClaims("capabilities must be non-empty")
        for device, fields in self.capabilities.items():
            if not device or not fields:
                raise InvalidClaims(f"empty capability entry for {device!r}")
        if not isinstance(self.cnf_jwk, dict) or not self.cnf_jwk:
            raise InvalidClaims("cnf holder key missing")
        if self.revocation_list_index < 0:
            raise InvalidClaims("revocation index must be non-negative")


def encode_vc(vc: CapabilityVC, issuer_key) -> str:
    """Render and sign the credential as an ES256 JWT."""
    vc.validate()
    payload = {
        "jti": vc.jti,
        "iss": vc.iss,
        "aud": vc.aud,
        "iat": int(vc.iat),
        "exp": int(vc.exp),
        "cnf": {"jwk": vc.cnf_jwk},
        "vc": {
            "@context": [CONTEXT_CREDENTIALS, CONTEXT_CAPABILITIES],
            "type": [TYPE_VERIFIABLE_CREDENTIAL],
            "credentialSubject": {
                "type": [TYPE_CAPABILITIES_CREDENTIAL],
                "capabilities": {
                    device: list(fields)
                    for device, fields in vc.capabilities.items()
                },
            },
            "credentialStatus": {
                "id": f"{vc.status_list_url}#{vc.revocation_list_index}",
                "type": STATUS_ENTRY_TYPE,
                "revocationListIndex": int(vc.revocation_list_index),
                "revocationListCredential": vc.status_list_url,
            },
        },
    }
    return jose.sign_compact(payload, issuer_key)


def decode_vc(token: str) -> CapabilityVC:
    """Parse a credential JWT without verifying its signature."""
    _, payload = jose.peek_compact(token)
    try:
        vc_claims = payload["vc"]
        subject = vc_claims["credentialSubject"]
        status = vc_claims.get("credentialStatus", {})
        if TYPE_VERIFIABLE_CREDENTIAL not in vc_claims.get("type", []):
            raise MalformedCredential("vc.type lacks VerifiableCredential")
        if TYPE_CAPABILITIES_CREDENTIAL not in subject.get("type", []):
            raise MalformedCredential(
                "credentialSubject.type lacks CapabilitiesCredential"
            )
        vc = CapabilityVC(
            jti=payload["jti"],
            iss=payload["iss"],
            aud=payload["aud"],
            iat=int(payload["iat"]),
            exp=int(payload["exp"]),
            cnf_jwk=payload["cnf"]["jwk"],
            capabilities=subject["capabilities"],
            revocation_list_index=int(status.get("revocationListIndex", -1)),
            status_list_url=status.get("revocationListCredential", ""),
        )
    except MalformedCredential:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedCredential(f"credential claims malformed: {exc}") from exc
    return vc


@dataclass(frozen=True)
class TrustStore:
    """Issuer keys plus the per-owner sets of trusted issuer URIs."""

    issuer_keys: dict  # issuer uri -> public JWK
    trusted: dict  # owner id -> set of issuer uris

    def issuers_for(self, owner_id: str):
        return self.trusted.get(owner_id, set())


def verify_validity(token: str, trust: TrustStore, now: float):
    """Expiry, signature, and issuer-trust checks, first failure wins.

    Returns (True, None) or (False, reason).
    """
    try:
        vc = decode_vc(token)
    except (MalformedCredential, jose.MalformedToken):
        return False, BAD_SIGNATURE
    if now > vc.exp:
        return False, EXPIRED
    issuer_jwk = trust.issuer_keys.get(vc.iss)
    if issuer_jwk is None:
        return False, UNTRUSTED_ISSUER
    try:
        jose.verify_compact(token, jose.public_key_from_jwk(issuer_jwk))
    except (jose.BadSignature, jose.MalformedToken):
        return False, BAD_SIGNATURE
    if vc.iss not in trust.issuers_for(vc.aud):
        return False, UNTRUSTED_ISSUER
    return True, None


def check_appropriateness(vc: CapabilityVC, owner_id, device_id, fields) -> bool:
    """True iff the credential covers this owner, device, and field set."""
    if vc.aud != owner_id:
        return False
    granted = vc.capabilities.get(device_id)
    if granted is None:
        return False
    return set(fields) <= set(granted)


# --- status list -------------------------------------------------------------


class StatusList:
    """Revocation bitstring: bit i set means credential with index i is revoked."""

    def __init__(self, bits: bytearray | None = None, issued_count: int = 0):
        self.bits = bytearray(bits) if bits is not None else bytearray(16)
        self.issued_count = issued_count

    def __len__(self) -> int:
        return len(self.bits) * 8

    def _check(self, index: int):
        if index < 0 or index >= len(self):
            raise IndexOutOfRange(f"bit {index} outside list of {len(self)} bits")

    def is_revoked(self, index: int) -> bool:
        self._check(index)
        return bool(self.bits[index // 8] & (1 << (7 - index % 8)))

    def revoke(self, index: int):
        self._check(index)
        self.bits[index // 8] |= 1 << (7 - index % 8)

    def allocate(self) -> int:
        """Next free index, doubling the bitstring when it fills up."""
        index = self.issued_count
        while index >= len(self):
            self.bits.extend(bytearray(len(self.bits)))
        self.issued_count = index + 1
        return index

    def popcount(self) -> int:
        return sum(bin(b).count("1") for b in self.bits)

    def to_wire(self, list_id: str) -> dict:
        return {
            "id": list_id,
            "encodedList": jose.b64url_encode(gzip.compress(bytes(self.bits))),
            "issuedCount": self.issued_count,
        }

    @classmethod
    def from_wire(cls, body: dict) -> "StatusList":
        try:
            bits = bytearray(gzip.decompress(jose.b64url_decode(body["encodedList"])))
            return cls(bits=bits, issued_count=int(body["issuedCount"]))
        except (KeyError, ValueError, TypeError, OSError) as exc:
            raise MalformedCredential(f"bad status list body: {exc}") from exc


def is_revoked(status_list: StatusList, index: int) -> bool:
    return status_list.is_revoked(index)


# --- DPoP --------------------------------------------------------------------


def normalize_htu(uri: str) -> str:
    """Scheme/host lowercased, default ports stripped, query and fragment dropped."""
    parts = urlsplit(uri)
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    port = parts.port
    if port and not (
        (scheme == "http" and port == 80) or (scheme == "https" and port == 443)
    ):
        host = f"{host}:{port}"
    return urlunsplit((scheme, host, parts.path or "/", "", ""))


def create_dpop(holder_key, method: str, uri: str, now: float) -> str:
    """Proof-of-possession JWS bound to one HTTP method and URI."""
    payload = {
        "jti": secrets.token_urlsafe(16),
        "htm": method.upper(),
        "htu": normalize_htu(uri),
        "iat": int(now),
    }
    header = {"typ": "dpop+jwt", "jwk": jose.jwk_from_key(holder_key)}
    return jose.sign_compact(payload, holder_key, header)


class ReplayCache:
    """Linearizable seen-nonce set with a sliding retention horizon."""

    def __init__(self, horizon: float = DPOP_REPLAY_HORIZON_SECONDS):
        self.horizon = horizon
        self._lock = threading.Lock()
        self._seen: dict = {}

    def check_and_insert(self, jti: str, now: float) -> bool:
        """Atomically record jti; False if it was already present."""
        with self._lock:
            cutoff = now - self.horizon
            if len(self._seen) > 1024:
                self._seen = {k: t for k, t in self._seen.items() if t >= cutoff}
            seen_at = self._seen.get(jti)
            if seen_at is not None and seen_at >= cutoff:
                return False
            self._seen[jti] = now
            return True

    def __contains__(self, jti: str) -> bool:
        with self._lock:
            return jti in self._seen


def verify_dpop(
    proof: str,
    cnf_jwk: dict,
    method: str,
    uri: str,
    now: float,
    replay_cache: ReplayCache,
    max_age: float = DPOP_FRESHNESS_SECONDS,
):
    """Validate a DPoP proof against the credential's bound key.

    Returns (True, None) or (False, reason); records the nonce only when every
    check passes.
    """
    try:
        holder_key = jose.public_key_from_jwk(cnf_jwk)
        _, payload = jose.verify_compact(proof, holder_key)
    except (jose.JoseError, KeyError):
        return False, BAD_SIGNATURE
    try:
        jti = payload["jti"]
        htm = payload["htm"]
        htu = payload["htu"]
        iat = int(payload["iat"])
    except (KeyError, TypeError, ValueError):
        return False, BAD_SIGNATURE
    if not isinstance(jti, str) or not jti:
        return False, BAD_SIGNATURE
    if abs(now - iat) > max_age:
        return False, STALE
    if htm != method.upper():
        return False, METHOD_MISMATCH
    if htu != normalize_htu(uri):
        return False, URI_MISMATCH
    if not replay_cache.check_and_insert(jti, now):
        return False, REPLAYED
    return True, None
