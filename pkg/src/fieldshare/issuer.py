"""Credential issuer: an OAuth 2.0 token endpoint that mints capability VCs.

Clients authenticate with the client-credentials grant; the request's rich
authorization details carry the holder public key (JWK) plus a key-possession
JWS so the issuer can bind the key into the credential's ``cnf`` claim. The
issued VC snapshots the owner-defined policy for that client and gets a fresh
position in the revocation status list.

State is an append-only JSON-lines event log (fsync'd before acknowledging)
replayed at startup; the status bitstring is additionally snapshotted via
write-then-rename. Token issuance and revocation serialize on one lock.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
import time
from pathlib import Path

import click
from fastapi import FastAPI, Form, Header, Request
from fastapi.responses import JSONResponse

from . import credential, jose
from .config import IssuerConfig

PBKDF2_ITERATIONS = 20_000


class IssuerError(Exception):
    def __init__(self, error: str, description: str = "", status: int = 400):
        super().__init__(description or error)
        self.error = error
        self.description = description
        self.status = status


class InvalidClient(IssuerError):
    def __init__(self, description="client authentication failed"):
        super().__init__("invalid_client", description, status=401)


class MissingAuthorizationDetails(IssuerError):
    def __init__(self, description="authorization_details missing or malformed"):
        super().__init__("invalid_request", description)


class InvalidKeyProof(IssuerError):
    def __init__(self, description="key-possession proof failed"):
        super().__init__("invalid_request", description)


class PolicyEmpty(IssuerError):
    def __init__(self, description="no access policy configured for client"):
        super().__init__("invalid_request", description, status=403)


class MalformedPolicy(IssuerError):
    def __init__(self, description="policy must map devices to non-empty field lists"):
        super().__init__("invalid_request", description)


def _hash_secret(secret: str, salt: bytes) -> str:
    return hashlib.pbkdf2_hmac(
        "sha256", secret.encode("utf-8"), salt, PBKDF2_ITERATIONS
    ).hex()


class IssuerState:
    """Clients, policies, trust records, issued credentials, and the status list."""

    def __init__(self, issuer_uri: str, signing_key, state_dir, vc_lifetime: int):
        self.issuer_uri = issuer_uri.rstrip("/")
        self.signing_key = signing_key
        self.vc_lifetime = vc_lifetime
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.clients: dict = {}
        self.policies: dict = {}
        self.trust: dict = {}
        self.issued: dict = {}  # jti -> {"index", "exp"}
        self.status = credential.StatusList()
        self.serial = 0
        self._lock = threading.Lock()
        self._log_path = self.state_dir / "events.jsonl"
        self._replay()
        self._log = open(self._log_path, "a", encoding="utf-8")

    @property
    def status_list_url(self) -> str:
        return f"{self.issuer_uri}/credentials/status/1"

    def issuer_jwk(self) -> dict:
        return jose.jwk_from_key(self.signing_key)

    # --- persistence ---------------------------------------------------------

    def _replay(self):
        if not self._log_path.exists():
            return
        with open(self._log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._apply(json.loads(line))

    def _apply(self, event: dict):
        kind = event["event"]
        if kind == "put_client":
            self.clients[event["clientId"]] = {
                "salt": event["salt"],
                "secretHash": event["secretHash"],
            }
        elif kind == "put_policy":
            self.policies[event["clientId"]] = {
                "ownerId": event["ownerId"],
                "capabilities": event["capabilities"],
            }
        elif kind == "put_trust":
            self.trust[event["ownerId"]] = event["issuers"]
        elif kind == "issue":
            self.issued[event["jti"]] = {
                "index": event["index"],
                "exp": event["exp"],
            }
            self.serial = max(self.serial, event["serial"])
            while event["index"] >= len(self.status):
                self.status.allocate()
            self.status.issued_count = max(
                self.status.issued_count, event["index"] + 1
            )
        elif kind == "revoke":
            self.status.revoke(event["index"])

    def _append(self, event: dict):
        self._log.write(json.dumps(event, separators=(",", ":")) + "\n")
        self._log.flush()
        os.fsync(self._log.fileno())

    def _snapshot_status(self):
        target = self.state_dir / "status.json"
        tmp = target.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.status.to_wire(self.status_list_url)))
        tmp.replace(target)

    # --- admin operations ------------------------------------------------------

    def put_client(self, client_id: str, client_secret: str):
        if not client_id or not client_secret:
            raise MalformedPolicy("client id and secret must be non-empty")
        salt = secrets.token_bytes(16)
        record = {"salt": salt.hex(), "secretHash": _hash_secret(client_secret, salt)}
        self.clients[client_id] = record
        self._append({"event": "put_client", "clientId": client_id, **record})

    def put_policy(self, client_id: str, owner_id: str, capabilities: dict):
        if not client_id or not owner_id or not isinstance(capabilities, dict):
            raise MalformedPolicy()
        if not capabilities:
            raise MalformedPolicy()
        for device, fields in capabilities.items():
            if (
                not device
                or not isinstance(fields, list)
                or not fields
                or not all(isinstance(f, str) and f for f in fields)
            ):
                raise MalformedPolicy(f"bad field list for device {device!r}")
        self.policies[client_id] = {"ownerId": owner_id, "capabilities": capabilities}
        self._append(
            {
                "event": "put_policy",
                "clientId": client_id,
                "ownerId": owner_id,
                "capabilities": capabilities,
            }
        )

    def put_trust(self, owner_id: str, issuers: list):
        if not owner_id or not isinstance(issuers, list):
            raise MalformedPolicy("trust record needs ownerId and issuer list")
        self.trust[owner_id] = issuers
        self._append({"event": "put_trust", "ownerId": owner_id, "issuers": issuers})

    # --- token issuance -------------------------------------------------------

    def authenticate(self, client_id: str, client_secret: str) -> bool:
        record = self.clients.get(client_id)
        if record is None:
            # burn comparable time so unknown ids are not distinguishable
            _hash_secret(client_secret or "", b"\x00" * 16)
            return False
        return secrets.compare_digest(
            record["secretHash"], _hash_secret(client_secret, bytes.fromhex(record["salt"]))
        )

    def parse_authorization_details(self, raw: str):
        """Extract (holder JWK, key-possession JWS) from the RAR payload."""
        if not raw:
            raise MissingAuthorizationDetails()
        try:
            details = json.loads(raw)
        except ValueError as exc:
            raise MissingAuthorizationDetails(f"not JSON: {exc}") from exc
        if isinstance(details, dict):
            details = [details]
        if not isinstance(details, list) or len(details) != 1:
            raise MissingAuthorizationDetails("exactly one detail entry required")
        entry = details[0]
        jwk = entry.get("jwk")
        proof = entry.get("keyProof")
        if not isinstance(jwk, dict) or not proof:
            raise MissingAuthorizationDetails("entry must carry jwk and keyProof")
        return jwk, proof

    def verify_key_proof(self, jwk: dict, proof: str, client_id: str):
        try:
            holder = jose.public_key_from_jwk(jwk)
            _, payload = jose.verify_compact(proof, holder)
        except jose.JoseError as exc:
            raise InvalidKeyProof(str(exc)) from exc
        if payload.get("client_id") != client_id:
            raise InvalidKeyProof("key proof bound to a different client_id")
        if "nonce" not in payload or "iat" not in payload:
            raise InvalidKeyProof("key proof must carry nonce and iat")

    def issue_token(
        self,
        client_id: str,
        client_secret: str,
        grant_type: str,
        authorization_details: str,
        now: float | None = None,
    ) -> dict:
        now = int(now if now is not None else time.time())
        if grant_type != "client_credentials":
            raise IssuerError("unsupported_grant_type", f"got {grant_type!r}")
        if not self.authenticate(client_id, client_secret):
            raise InvalidClient()
        jwk, proof = self.parse_authorization_details(authorization_details)
        self.verify_key_proof(jwk, proof, client_id)
        policy = self.policies.get(client_id)
        if not policy or not policy["capabilities"]:
            raise PolicyEmpty()
        with self._lock:
            index = self.status.allocate()
            self.serial += 1
            jti = f"{self.issuer_uri}/credentials/{self.serial}"
            vc = credential.CapabilityVC(
                jti=jti,
                iss=self.issuer_uri,
                aud=policy["ownerId"],
                iat=now,
                exp=now + self.vc_lifetime,
                cnf_jwk=jwk,
                capabilities=policy["capabilities"],
                revocation_list_index=index,
                status_list_url=self.status_list_url,
            )
            token = credential.encode_vc(vc, self.signing_key)
            self.issued[jti] = {"index": index, "exp": vc.exp}
            self._append(
                {
                    "event": "issue",
                    "jti": jti,
                    "index": index,
                    "exp": vc.exp,
                    "serial": self.serial,
                }
            )
            self._snapshot_status()
        return {
            "access_token": token,
            "token_type": "vc+jwt",
            "expires_in": self.vc_lifetime,
        }

    def revoke(self, jti: str) -> bool:
        with self._lock:
            record = self.issued.get(jti)
            if record is None:
                return False
            self.status.revoke(record["index"])
            self._append({"event": "revoke", "jti": jti, "index": record["index"]})
            self._snapshot_status()
            return True

    def status_body(self) -> dict:
        with self._lock:
            return self.status.to_wire(self.status_list_url)


# --- HTTP app -----------------------------------------------------------------


def create_app(state: IssuerState, admin_key: str) -> FastAPI:
    app = FastAPI(title="capability-vc-issuer")

    def require_admin(key):
        if not key or not secrets.compare_digest(key, admin_key):
            raise IssuerError("unauthorized", "admin key required", status=401)

    @app.exception_handler(IssuerError)
    async def issuer_error(_req: Request, exc: IssuerError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.error, "error_description": exc.description},
        )

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/token")
    def token(
        grant_type: str = Form(default=""),
        client_id: str = Form(default=""),
        client_secret: str = Form(default=""),
        authorization_details: str = Form(default=""),
    ):
        return state.issue_token(
            client_id, client_secret, grant_type, authorization_details
        )

    @app.get("/credentials/status/1")
    def status_list():
        return JSONResponse(
            content=state.status_body(),
            headers={"Cache-Control": "public, max-age=60"},
        )

    @app.post("/revoke")
    def revoke(body: dict, x_admin_key: str | None = Header(default=None)):
        require_admin(x_admin_key)
        jti = body.get("jti", "")
        if not state.revoke(jti):
            return JSONResponse(status_code=404, content={"error": "not_found"})
        return {"revoked": jti}

    @app.post("/admin/clients")
    def put_client(body: dict, x_admin_key: str | None = Header(default=None)):
        require_admin(x_admin_key)
        state.put_client(body.get("clientId", ""), body.get("clientSecret", ""))
        return {"ok": True}

    @app.post("/admin/policies")
    def put_policy(body: dict, x_admin_key: str | None = Header(default=None)):
        require_admin(x_admin_key)
        state.put_policy(
            body.get("clientId", ""),
            body.get("ownerId", ""),
            body.get("capabilities", {}),
        )
        return {"ok": True}

    @app.post("/admin/trust")
    def put_trust(body: dict, x_admin_key: str | None = Header(default=None)):
        require_admin(x_admin_key)
        state.put_trust(body.get("ownerId", ""), body.get("issuers", []))
        return {"ok": True}

    @app.get("/trust/{owner_id}")
    def get_trust(owner_id: str):
        return {"ownerId": owner_id, "issuers": state.trust.get(owner_id, [])}

    @app.get("/jwks")
    def jwks():
        return {"keys": [state.issuer_jwk()]}

    return app


def load_signing_key(path):
    from cryptography.hazmat.primitives import serialization

    return serialization.load_pem_private_key(Path(path).read_bytes(), password=None)


def app_from_config(config: IssuerConfig) -> FastAPI:
    state = IssuerState(
        issuer_uri=config.issuer_uri,
        signing_key=load_signing_key(config.signing_key_path),
        state_dir=config.state_dir,
        vc_lifetime=config.vc_lifetime_seconds,
    )
    return create_app(state, admin_key=config.admin_key)


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def main(config_path):
    """Run the credential issuer service."""
    import uvicorn

    config = IssuerConfig.from_file(config_path)
    uvicorn.run(
        app_from_config(config),
        host=config.host,
        port=config.port,
        log_level="warning",
    )


if __name__ == "__main__":
    main()
