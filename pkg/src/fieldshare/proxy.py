"""Policy-enforcement proxy: credential checks in front, selective disclosure behind.

Every data request runs the same pipeline, stopping at the first failure:

1. decode the capability credential from the Authorization header;
2. appropriateness - the credential must cover this owner, device, and the
   requested fields;
3. validity - expiry, issuer signature, issuer trusted by the owner;
4. revocation status against the cached issuer status list;
5. proof of key possession (DPoP) bound to this method and URI;
6. fetch the latest signed document from the gateway;
7. frame the requested fields, derive the selective-disclosure proof under a
   fresh presentation nonce;
8. self-verify and emit the disclosure envelope.

Errors are RFC-7807-style problem JSON carrying the typed reason in ``title``.
"""

from __future__ import annotations

import json
import secrets
import threading
import time

import click
import httpx
from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import credential, mmsig
from .canonical import canonicalize, decode_message
from .config import ProxyConfig
from .framing import (
    EmptyFieldList,
    SparseSubItem,
    apply_frame,
    frame_from_fields,
    reconstruct,
    reveal_indices,
)
from .gateway import SignedDocument
from .jose import MalformedToken, b64url_decode, b64url_encode

PRESENTATION_NONCE_BYTES = 32


class ProblemError(Exception):
    """Pipeline failure rendered as problem+json."""

    def __init__(self, status: int, title: str, detail: str = ""):
        super().__init__(detail or title)
        self.status = status
        self.title = title
        self.detail = detail

    def body(self) -> dict:
        return {
            "type": "about:blank",
            "title": self.title,
            "status": self.status,
            "detail": self.detail,
        }


class MalformedEnvelope(Exception):
    pass


class IssuerUnreachable(Exception):
    pass


class StatusListCache:
    """TTL cache for the issuer status list; serves stale within a grace window."""

    def __init__(self, client: httpx.Client, url: str, ttl: float, grace: float):
        self.client = client
        self.url = url
        self.ttl = ttl
        self.grace = grace
        self.fetch_count = 0
        self._lock = threading.Lock()
        self._cached: credential.StatusList | None = None
        self._fetched_at = float("-inf")

    def get(self, now: float) -> credential.StatusList:
        with self._lock:
            if self._cached is not None and now - self._fetched_at <= self.ttl:
                return self._cached
            try:
                response = self.client.get(self.url)
                response.raise_for_status()
                fresh = credential.StatusList.from_wire(response.json())
            except (httpx.HTTPError, credential.MalformedCredential, ValueError):
                if (
                    self._cached is not None
                    and now - self._fetched_at <= self.ttl + self.grace
                ):
                    return self._cached  # stale but inside the grace window
                raise IssuerUnreachable(self.url)
            self.fetch_count += 1
            self._cached = fresh
            self._fetched_at = now
            return fresh


def build_envelope(signed: SignedDocument, fields, signer_pk: bytes) -> dict:
    """Frame, prove, and package the disclosure for one authorized request."""
    canon = canonicalize(signed.doc)
    frame = frame_from_fields(fields)
    sub = apply_frame(signed.doc, frame)
    indices = reveal_indices(canon, sub)
    sig = mmsig.MultiSignature(data=signed.signature, message_count=canon.count)
    nonce = secrets.token_bytes(PRESENTATION_NONCE_BYTES)
    proof = mmsig.derive_proof(signer_pk, sig, canon.encodings(), indices, nonce)
    display = reconstruct(sub).document
    encodings = canon.encodings()
    return {
        "revealed": [
            {"index": i, "message": b64url_encode(encodings[i])} for i in indices
        ],
        "proof": b64url_encode(proof.data),
        "totalCount": canon.count,
        "signerKeyId": signed.signer_key_id,
        "presentationNonce": b64url_encode(nonce),
        "display": display,
    }


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def verify_envelope(envelope: dict, signer_pk: bytes) -> bool:
    """Client-side check: proof verifies and the display matches the messages."""
    try:
        entries = envelope["revealed"]
        proof_bytes = b64url_decode(envelope["proof"])
        total = int(envelope["totalCount"])
        nonce = b64url_decode(envelope["presentationNonce"])
        display = envelope["display"]
        revealed = {
            int(entry["index"]): b64url_decode(entry["message"]) for entry in entries
        }
    except (KeyError, TypeError, ValueError, MalformedToken) as exc:
        raise MalformedEnvelope(str(exc)) from exc
    indices = tuple(sorted(revealed))
    proof = mmsig.SelectiveProof(
        data=proof_bytes,
        revealed_indices=indices,
        total_count=total,
        presentation_nonce=nonce,
    )
    try:
        if not mmsig.verify_proof(signer_pk, proof, revealed, nonce):
            return False
    except (mmsig.MalformedProof, mmsig.MalformedInput):
        return False
    try:
        pairs = [decode_message(m) for m in revealed.values()]
        pairs.sort(key=lambda pv: pv[0].sort_key())
        rebuilt = reconstruct(SparseSubItem(revealed=tuple(pairs))).document
    except Exception:  # malformed messages or inconsistent paths: not a valid envelope
        return False
    return _canonical_json(rebuilt) == _canonical_json(display)


class PepProxy:
    """Request pipeline state: trust anchors, caches, and upstream clients."""

    def __init__(
        self,
        config: ProxyConfig,
        gateway_client: httpx.Client,
        status_client: httpx.Client,
    ):
        self.config = config
        self.gateway = gateway_client
        self.trust = credential.TrustStore(
            issuer_keys={e["iss"]: e["jwk"] for e in config.trusted_issuers},
            trusted={config.owner_id: {e["iss"] for e in config.trusted_issuers}},
        )
        self.signer_keys = {
            key_id: b64url_decode(pk) for key_id, pk in config.signer_keys.items()
        }
        self.replay_cache = credential.ReplayCache(
            horizon=2 * config.dpop_max_age_seconds
        )
        self.status_cache = StatusListCache(
            status_client,
            config.status_list_url,
            ttl=config.status_ttl_seconds,
            grace=config.status_grace_seconds,
        )

    @property
    def data_uri(self) -> str:
        return f"{self.config.external_base_url.rstrip('/')}/data"

    def handle_data_request(
        self,
        device_id: str,
        fields,
        vc_jwt: str | None,
        dpop: str | None,
        now: float | None = None,
    ) -> dict:
        now = time.time() if now is None else now

        if not device_id:
            raise ProblemError(400, "BadRequest", "deviceID query parameter required")
        if (
            not isinstance(fields, list)
            or not fields
            or not all(isinstance(f, str) and f for f in fields)
        ):
            raise ProblemError(400, "BadRequest", "fields must be a non-empty list")

        # 1: decode credential
        if not vc_jwt:
            raise ProblemError(401, "MissingCredential", "Authorization: DPoP <vc> required")
        try:
            vc = credential.decode_vc(vc_jwt)
        except (credential.MalformedCredential, MalformedToken) as exc:
            raise ProblemError(401, "MissingCredential", f"unparseable credential: {exc}")

        # 2: appropriateness
        if not credential.check_appropriateness(
            vc, self.config.owner_id, device_id, fields
        ):
            raise ProblemError(
                403,
                "NotAppropriate",
                "credential does not cover this owner, device, and field set",
            )

        # 3: validity
        ok, reason = credential.verify_validity(vc_jwt, self.trust, now)
        if not ok:
            raise ProblemError(401, reason, "credential validity check failed")

        # 4: revocation status
        try:
            status = self.status_cache.get(now)
        except IssuerUnreachable as exc:
            raise ProblemError(503, "IssuerUnreachable", str(exc))
        index = vc.revocation_list_index
        try:
            revoked = status.is_revoked(index)
        except credential.IndexOutOfRange:
            revoked = True  # unknown position: fail closed
        if revoked:
            raise ProblemError(401, "Revoked", f"status bit {index} is set")

        # 5: proof of possession
        if not dpop:
            raise ProblemError(401, "MissingProof", "DPoP header required")
        ok, reason = credential.verify_dpop(
            dpop,
            vc.cnf_jwk,
            "POST",
            self.data_uri,
            now,
            self.replay_cache,
            max_age=self.config.dpop_max_age_seconds,
        )
        if not ok:
            raise ProblemError(401, reason, "proof of key possession failed")

        # 6: fetch the signed document
        try:
            response = self.gateway.get(f"/store/{device_id}/latest")
        except httpx.HTTPError as exc:
            raise ProblemError(502, "GatewayUnreachable", str(exc))
        if response.status_code == 404:
            raise ProblemError(404, "NotFound", f"no documents for {device_id!r}")
        if response.status_code != 200:
            raise ProblemError(502, "GatewayError", response.text)
        try:
            signed = SignedDocument.from_wire(response.json())
        except (KeyError, ValueError, TypeError, MalformedToken) as exc:
            raise ProblemError(502, "GatewayError", f"bad document wire format: {exc}")

        # 7: selective disclosure
        signer_pk = self.signer_keys.get(signed.signer_key_id)
        if signer_pk is None:
            raise ProblemError(
                502, "UnknownSigner", f"no key registered as {signed.signer_key_id!r}"
            )
        try:
            envelope = build_envelope(signed, fields, signer_pk)
        except mmsig.InvalidSignature as exc:
            raise ProblemError(502, "StorageCorrupted", str(exc))
        except EmptyFieldList as exc:
            raise ProblemError(400, "BadRequest", str(exc))

        # 8: never emit an envelope that does not verify
        if not verify_envelope(envelope, signer_pk):
            raise ProblemError(500, "ProverFault", "derived envelope failed self-check")
        return envelope


def create_app(
    config: ProxyConfig,
    gateway_client: httpx.Client | None = None,
    status_client: httpx.Client | None = None,
) -> FastAPI:
    gateway_client = gateway_client or httpx.Client(
        base_url=config.gateway_url, timeout=10.0
    )
    status_client = status_client or httpx.Client(timeout=10.0)
    proxy = PepProxy(config, gateway_client, status_client)
    app = FastAPI(title="pep-proxy")
    app.state.proxy = proxy

    @app.exception_handler(ProblemError)
    async def problem(_req: Request, exc: ProblemError):
        return JSONResponse(
            status_code=exc.status,
            content=exc.body(),
            media_type="application/problem+json",
        )

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/data")
    def data(
        request: Request,
        body: dict,
        deviceID: str = "",
        authorization: str | None = Header(default=None),
        dpop: str | None = Header(default=None),
    ):
        vc_jwt = None
        if authorization:
            scheme, _, token = authorization.partition(" ")
            if scheme.lower() == "dpop" and token.strip():
                vc_jwt = token.strip()
        fields = body.get("fields") if isinstance(body, dict) else None
        return proxy.handle_data_request(deviceID, fields, vc_jwt, dpop)

    @app.get("/keys/{key_id}")
    def signer_key(key_id: str):
        pk = proxy.signer_keys.get(key_id)
        if pk is None:
            raise ProblemError(404, "NotFound", f"unknown key id {key_id!r}")
        return {"keyId": key_id, "publicKey": b64url_encode(pk)}

    return app


def app_from_config(config: ProxyConfig) -> FastAPI:
    return create_app(config)


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def main(config_path):
    """Run the policy-enforcement proxy."""
    import uvicorn

    config = ProxyConfig.from_file(config_path)
    uvicorn.run(
        app_from_config(config),
        host=config.host,
        port=config.port,
        log_level="warning",
    )


if __name__ == "__main__":
    main()
