"""In-process service stack wiring issuer, gateway, and proxy for tests."""

import json
import secrets
import time
from dataclasses import dataclass, field

import httpx
from fastapi.testclient import TestClient

from fieldshare import credential, jose, mmsig
from fieldshare.config import GatewayConfig, ProxyConfig
from fieldshare.gateway import StorageNode
from fieldshare.gateway import create_app as gateway_app_factory
from fieldshare.issuer import IssuerState
from fieldshare.issuer import create_app as issuer_app_factory
from fieldshare.jose import b64url_encode
from fieldshare.proxy import create_app as proxy_app_factory

OWNER = "owner-1"
ADMIN_KEY = "admin-key-for-tests"
STORE_KEY = "store-key-for-tests"
ISSUER_URI = "http://issuer.test"
PROXY_URI = "http://proxy.test"
CLIENT_ID = "client-1"
CLIENT_SECRET = "s3cret-value"


@dataclass
class Stack:
    issuer_state: IssuerState
    issuer: TestClient
    gateway: TestClient
    proxy: TestClient
    issuer_key: object
    transcoder_kp: mmsig.SignerKeyPair
    holder_key: object
    device_id: str = "monitor-1"
    extra: dict = field(default_factory=dict)

    @property
    def data_uri(self) -> str:
        return f"{PROXY_URI}/data"

    def issue_token(self, client_id=CLIENT_ID, secret=CLIENT_SECRET, holder=None):
        holder = holder or self.holder_key
        proof = jose.sign_compact(
            {
                "client_id": client_id,
                "iat": int(time.time()),
                "nonce": secrets.token_urlsafe(8),
            },
            holder,
        )
        details = json.dumps(
            [{"type": "capability-credential", "jwk": jose.jwk_from_key(holder), "keyProof": proof}]
        )
        return self.issuer.post(
            "/token",
            data={
                "grant_type": "client_credentials",
                "client_id": client_id,
                "client_secret": secret,
                "authorization_details": details,
            },
        )

    def make_dpop(self, method="POST", uri=None, now=None, holder=None):
        return credential.create_dpop(
            holder or self.holder_key,
            method,
            uri or self.data_uri,
            time.time() if now is None else now,
        )

    def request_data(self, device_id, fields, vc=None, dpop=None, headers=None):
        hdrs = dict(headers or {})
        if vc is not None:
            hdrs["Authorization"] = f"DPoP {vc}"
        if dpop is not None:
            hdrs["DPoP"] = dpop
        return self.proxy.post(
            f"/data?deviceID={device_id}", json={"fields": fields}, headers=hdrs
        )

    def upload_measurements(self, doc):
        from fieldshare.transcoder import sign_and_upload

        return sign_and_upload(
            doc, self.transcoder_kp, "unused", STORE_KEY, client=self.gateway
        )


class _BrokenTransport(httpx.BaseTransport):
    def handle_request(self, request):
        raise httpx.ConnectError("upstream intentionally unreachable")


def broken_client() -> httpx.Client:
    return httpx.Client(transport=_BrokenTransport(), base_url="http://down.test")


def make_stack(
    tmp_path,
    status_ttl=0.0,
    status_grace=300.0,
    vc_lifetime=86400,
    dpop_max_age=60.0,
    gateway_client=None,
    status_client=None,
) -> Stack:
    issuer_key = jose.generate_p256_key()
    holder_key = jose.generate_p256_key()
    transcoder_kp = mmsig.keygen(seed=b"stack-transcoder-keypair-seed-01", key_id="tk-1")

    state = IssuerState(
        issuer_uri=ISSUER_URI,
        signing_key=issuer_key,
        state_dir=tmp_path / "issuer-state",
        vc_lifetime=vc_lifetime,
    )
    issuer_app = issuer_app_factory(state, admin_key=ADMIN_KEY)
    issuer_client = TestClient(issuer_app)

    gateway_config = GatewayConfig(
        storage_dir=str(tmp_path / "store"),
        api_key=STORE_KEY,
        proxy_base_url=PROXY_URI,
        devices={"monitor-1": {"title": "Environment monitor", "owner": OWNER}},
        signers={
            transcoder_kp.key_id: {
                "publicKey": b64url_encode(transcoder_kp.public_key),
                "owner": OWNER,
            }
        },
    )
    storage = StorageNode(gateway_config.storage_dir, gateway_config.signers)
    gateway_app = gateway_app_factory(storage, gateway_config)
    gateway_test_client = TestClient(gateway_app)

    proxy_config = ProxyConfig(
        owner_id=OWNER,
        gateway_url="http://gateway.test",
        status_list_url="/credentials/status/1",
        external_base_url=PROXY_URI,
        trusted_issuers=[{"iss": ISSUER_URI, "jwk": jose.jwk_from_key(issuer_key)}],
        signer_keys={
            transcoder_kp.key_id: b64url_encode(transcoder_kp.public_key)
        },
        status_ttl_seconds=status_ttl,
        status_grace_seconds=status_grace,
        dpop_max_age_seconds=dpop_max_age,
    )
    proxy_app = proxy_app_factory(
        proxy_config,
        gateway_client=gateway_client or TestClient(gateway_app),
        status_client=status_client or TestClient(issuer_app),
    )
    proxy_client = TestClient(proxy_app)

    # owner-side setup: client credentials, policy, trust anchors
    for path, body in (
        ("/admin/clients", {"clientId": CLIENT_ID, "clientSecret": CLIENT_SECRET}),
        (
            "/admin/policies",
            {
                "clientId": CLIENT_ID,
                "ownerId": OWNER,
                "capabilities": {"monitor-1": ["temperature"]},
            },
        ),
        (
            "/admin/trust",
            {
                "ownerId": OWNER,
                "issuers": [
                    {"iss": ISSUER_URI, "jwk": jose.jwk_from_key(issuer_key)}
                ],
            },
        ),
    ):
        response = issuer_client.post(path, json=body, headers={"X-Admin-Key": ADMIN_KEY})
        assert response.status_code == 200, response.text

    return Stack(
        issuer_state=state,
        issuer=issuer_client,
        gateway=gateway_test_client,
        proxy=proxy_client,
        issuer_key=issuer_key,
        transcoder_kp=transcoder_kp,
        holder_key=holder_key,
        extra={"proxy_config": proxy_config, "proxy_app": proxy_app},
    )
