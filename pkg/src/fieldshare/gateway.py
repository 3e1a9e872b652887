"""Storage node plus Web of Things gateway for signed measurement documents.

Documents arrive from transcoders with a multi-message signature over their
canonical form; the signature is verified against the registered signer key
both at ingestion and again at read time, so a corrupted store can never serve
an unverifiable document. Storage is a directory per device with one JSON file
per stored document and a write-then-rename index.

The gateway half serves Thing Descriptions whose read forms point at the
enforcement proxy, never directly at this node.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import click
from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import mmsig
from .canonical import CanonicalizationError, canonicalize
from .config import GatewayConfig
from .jose import MalformedToken, b64url_decode, b64url_encode

TD_CONTEXT = "https://www.w3.org/2019/wot/td/v1"


class GatewayError(Exception):
    def __init__(self, title: str, detail: str = "", status: int = 400):
        super().__init__(detail or title)
        self.title = title
        self.detail = detail
        self.status = status


class BadSignature(GatewayError):
    def __init__(self, detail="document signature failed verification"):
        super().__init__("BadSignature", detail, status=400)


class UnknownSigner(GatewayError):
    def __init__(self, detail="signer key is not registered"):
        super().__init__("UnknownSigner", detail, status=403)


class NotFound(GatewayError):
    def __init__(self, detail="no such resource"):
        super().__init__("NotFound", detail, status=404)


class CorruptedStore(GatewayError):
    def __init__(self, detail="stored document no longer verifies"):
        super().__init__("CorruptedStore", detail, status=500)


@dataclass(frozen=True)
class SignedDocument:
    doc: dict
    canonical_count: int
    signature: bytes
    signer_key_id: str
    stored_at: int  # nanoseconds

    def to_wire(self) -> dict:
        return {
            "doc": self.doc,
            "canonicalCount": self.canonical_count,
            "signature": b64url_encode(self.signature),
            "signerKeyId": self.signer_key_id,
            "storedAt": self.stored_at,
        }

    @classmethod
    def from_wire(cls, body: dict) -> "SignedDocument":
        return cls(
            doc=body["doc"],
            canonical_count=int(body["canonicalCount"]),
            signature=b64url_decode(body["signature"]),
            signer_key_id=body["signerKeyId"],
            stored_at=int(body["storedAt"]),
        )


class StorageNode:
    """Append-only per-device document store with signature gating."""

    def __init__(self, root, signers: dict):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.signers = signers  # key id -> {"publicKey": b64url, "owner": str}
        self._lock = threading.Lock()

    def _signer_pk(self, key_id: str) -> bytes:
        entry = self.signers.get(key_id)
        if entry is None:
            raise UnknownSigner(f"key {key_id!r} is not registered")
        return b64url_decode(entry["publicKey"])

    def _verify(self, doc: dict, signature: bytes, key_id: str) -> int:
        pk = self._signer_pk(key_id)
        form = canonicalize(doc)
        sig = mmsig.MultiSignature(data=signature, message_count=form.count)
        if not mmsig.verify(pk, form.encodings(), sig):
            raise BadSignature()
        return form.count

    def put(self, device_id: str, doc: dict, signature: bytes, key_id: str) -> dict:
        if not isinstance(doc, dict) or not doc.get("deviceID"):
            raise GatewayError("BadDocument", "doc.deviceID must be present", 400)
        if doc["deviceID"] != device_id:
            raise GatewayError("BadDocument", "deviceID mismatch with path", 400)
        try:
            count = self._verify(doc, signature, key_id)
        except mmsig.MalformedInput as exc:
            raise BadSignature(str(exc)) from exc
        except CanonicalizationError as exc:
            raise GatewayError("BadDocument", str(exc), 400) from exc
        with self._lock:
            stored_at = time.time_ns()
            directory = self.root / device_id
            directory.mkdir(parents=True, exist_ok=True)
            while (directory / f"{stored_at}.json").exists():
                stored_at += 1
            record = SignedDocument(
                doc=doc,
                canonical_count=count,
                signature=signature,
                signer_key_id=key_id,
                stored_at=stored_at,
            )
            path = directory / f"{stored_at}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(record.to_wire()))
            tmp.replace(path)
            index_path = directory / "index.json"
            entries = []
            if index_path.exists():
                entries = json.loads(index_path.read_text())
            entries.append(stored_at)
            tmp = index_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entries))
            tmp.replace(index_path)
        return {
            "deviceID": device_id,
            "storedAt": stored_at,
            "canonicalCount": count,
        }

    def _entries(self, device_id: str) -> list:
        index_path = self.root / device_id / "index.json"
        if not index_path.exists():
            return []
        return json.loads(index_path.read_text())

    def _read(self, device_id: str, stored_at: int) -> SignedDocument:
        path = self.root / device_id / f"{stored_at}.json"
        try:
            record = SignedDocument.from_wire(json.loads(path.read_text()))
        except (OSError, ValueError, KeyError) as exc:
            raise CorruptedStore(f"cannot load {path.name}: {exc}") from exc
        # defense in depth: no unsigned document is ever readable
        try:
            self._verify(record.doc, record.signature, record.signer_key_id)
        except (
            BadSignature,
            UnknownSigner,
            mmsig.MalformedInput,
            CanonicalizationError,
        ) as exc:
            raise CorruptedStore(str(exc)) from exc
        return record

    def latest(self, device_id: str) -> SignedDocument:
        entries = self._entries(device_id)
        if not entries:
            raise NotFound(f"no documents for device {device_id!r}")
        return self._read(device_id, max(entries))

    def in_range(self, device_id: str, start=None, end=None) -> list:
        out = []
        for ts in sorted(self._entries(device_id)):
            if start is not None and ts < start:
                continue
            if end is not None and ts > end:
                continue
            out.append(self._read(device_id, ts))
        return out


def thing_description(device_id: str, title: str, proxy_base_url: str) -> dict:
    """WoT TD whose measurement-read form points at the enforcement proxy."""
    data_href = f"{proxy_base_url.rstrip('/')}/data?deviceID={device_id}"
    return {
        "@context": TD_CONTEXT,
        "id": device_id,
        "title": title,
        "securityDefinitions": {
            "capability_sc": {
                "scheme": "bearer",
                "format": "jwt",
                "in": "header",
                "name": "Authorization",
            }
        },
        "security": ["capability_sc"],
        "properties": {
            "measurements": {
                "type": "object",
                "readOnly": True,
                "forms": [
                    {
                        "href": data_href,
                        "htv:methodName": "POST",
                        "op": ["readproperty"],
                        "contentType": "application/json",
                    }
                ],
            }
        },
    }


def create_app(storage: StorageNode, config: GatewayConfig) -> FastAPI:
    app = FastAPI(title="wot-storage-gateway")

    @app.exception_handler(GatewayError)
    async def gateway_error(_req: Request, exc: GatewayError):
        return JSONResponse(
            status_code=exc.status,
            content={"title": exc.title, "detail": exc.detail, "status": exc.status},
        )

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.get("/things")
    def list_things():
        return sorted(config.devices)

    @app.get("/things/{device_id}")
    def get_thing(device_id: str):
        entry = config.devices.get(device_id)
        if entry is None:
            raise NotFound(f"device {device_id!r} is not registered")
        return thing_description(
            device_id, entry.get("title", device_id), config.proxy_base_url
        )

    @app.post("/store/{device_id}")
    def store(device_id: str, body: dict, x_api_key: str | None = Header(default=None)):
        if x_api_key != config.api_key:
            raise GatewayError("Unauthorized", "bad api key", 401)
        try:
            signature = b64url_decode(body.get("signature", ""))
            key_id = body["signerKeyId"]
            doc = body["doc"]
        except (KeyError, TypeError, MalformedToken) as exc:
            raise GatewayError("BadDocument", f"bad upload body: {exc}", 400) from exc
        return storage.put(device_id, doc, signature, key_id)

    @app.get("/store/{device_id}/latest")
    def latest(device_id: str):
        return storage.latest(device_id).to_wire()

    @app.get("/store/{device_id}")
    def in_range(device_id: str, start: int | None = None, end: int | None = None):
        return [r.to_wire() for r in storage.in_range(device_id, start, end)]

    return app


def app_from_config(config: GatewayConfig) -> FastAPI:
    return create_app(StorageNode(config.storage_dir, config.signers), config)


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def main(config_path):
    """Run the storage node and WoT gateway."""
    import uvicorn

    config = GatewayConfig.from_file(config_path)
    uvicorn.run(
        app_from_config(config),
        host=config.host,
        port=config.port,
        log_level="warning",
    )


if __name__ == "__main__":
    main()
