"""Dataclass configs for the issuer, storage gateway, and enforcement proxy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


def _load(path) -> dict:
    return json.loads(Path(path).read_text())


@dataclass
class IssuerConfig:
    issuer_uri: str
    signing_key_path: str
    admin_key: str
    state_dir: str
    vc_lifetime_seconds: int = 86400
    host: str = "127.0.0.1"
    port: int = 8001

    @classmethod
    def from_file(cls, path) -> "IssuerConfig":
        return cls(**_load(path))


@dataclass
class GatewayConfig:
    storage_dir: str
    api_key: str
    proxy_base_url: str
    devices: dict = field(default_factory=dict)  # id -> {"title", "owner"}
    signers: dict = field(default_factory=dict)  # key id -> {"publicKey", "owner"}
    host: str = "127.0.0.1"
    port: int = 8002

    @classmethod
    def from_file(cls, path) -> "GatewayConfig":
        return cls(**_load(path))


@dataclass
class ProxyConfig:
    owner_id: str
    gateway_url: str
    status_list_url: str
    external_base_url: str  # URI clients bind DPoP proofs to
    trusted_issuers: list = field(default_factory=list)  # [{"iss", "jwk"}]
    signer_keys: dict = field(default_factory=dict)  # key id -> base64url public key
    status_ttl_seconds: float = 60.0
    status_grace_seconds: float = 300.0
    dpop_max_age_seconds: float = 60.0
    host: str = "127.0.0.1"
    port: int = 8003

    @classmethod
    def from_file(cls, path) -> "ProxyConfig":
        return cls(**_load(path))
