"""Scenario runner and proof benchmark.

``bench`` reproduces the selective-disclosure cost sweep: one signed document
with N single-value fields, then for each revealed-field count k the median
prove/verify wall time and proof size over repeated runs.

``e2e`` exercises the full deployment story against real local processes:
owner setup, credential issuance, transcoding and upload, an authorized
request with client-side envelope verification, and the standard batch of
negative cases.
"""

from __future__ import annotations

import json
import random
import secrets
import socket
import statistics
import subprocess
import sys
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import click
import httpx

from . import credential, jose, mmsig
from .canonical import canonicalize
from .framing import apply_frame, frame_from_fields, reveal_indices
from .jose import b64url_encode
from .proxy import verify_envelope
from .transcoder import RawReading, save_keyfile, sign_and_upload, transcode


def gen_doc(n_fields: int, seed: int = 0) -> dict:
    """Deterministic measurement document with one (time, value) pair per field."""
    if n_fields < 1:
        raise ValueError("need at least one field")
    rng = random.Random(seed)
    base_time = 1658162155
    measurements = [
        {
            "field": f"field-{i:03d}",
            "values": [
                {"time": str(base_time + i), "value": f"{rng.randrange(1000)}"}
            ],
        }
        for i in range(n_fields)
    ]
    return {"deviceID": f"bench-{n_fields}-{seed}", "measurements": measurements}


@dataclass(frozen=True)
class BenchRecord:
    revealed_count: int
    prove_ms: float
    verify_ms: float
    proof_bytes: int


def run_bench(
    doc: dict,
    revealed_counts,
    repetitions: int = 20,
    keypair: mmsig.SignerKeyPair | None = None,
    progress=None,
) -> list:
    """Median prove/verify times for each revealed-field count."""
    kp = keypair or mmsig.keygen(seed=b"bench-keypair-seed-0123456789abc")
    canon = canonicalize(doc)
    messages = canon.encodings()
    sig = mmsig.sign(kp, messages)
    field_names = [m["field"] for m in doc["measurements"]]
    records = []
    for k in revealed_counts:
        frame = frame_from_fields(field_names[:k])
        sub = apply_frame(doc, frame)
        indices = reveal_indices(canon, sub)
        revealed_map = {i: messages[i] for i in indices}
        prove_times = []
        verify_times = []
        proof_len = 0
        for _ in range(repetitions):
            nonce = secrets.token_bytes(32)
            t0 = time.perf_counter()
            proof = mmsig.derive_proof(kp.public_key, sig, messages, indices, nonce)
            t1 = time.perf_counter()
            ok = mmsig.verify_proof(kp.public_key, proof, revealed_map, nonce)
            t2 = time.perf_counter()
            if not ok:
                raise RuntimeError(f"benchmark proof failed to verify at k={k}")
            prove_times.append((t1 - t0) * 1000.0)
            verify_times.append((t2 - t1) * 1000.0)
            proof_len = len(proof.data)
        record = BenchRecord(
            revealed_count=k,
            prove_ms=statistics.median(prove_times),
            verify_ms=statistics.median(verify_times),
            proof_bytes=proof_len,
        )
        records.append(record)
        if progress:
            progress(record)
    return records


def write_bench_csv(records, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["revealed_count", "prove_ms", "verify_ms", "proof_bytes"]
        )
        writer.writeheader()
        for record in records:
            writer.writerow(asdict(record))


def write_bench_json(records, path, meta=None):
    Path(path).write_text(
        json.dumps(
            {"meta": meta or {}, "records": [asdict(r) for r in records]}, indent=2
        )
    )


# --- end-to-end orchestration ---------------------------------------------------


LISTING_READINGS = [
    RawReading("monitor-1", "temperature", "30C", 1658162155),
    RawReading("monitor-1", "humidity", "50", 1658162155),
]

LISTING_OUTPUT = {
    "measurements": [{"field": "temperature", "values": [{"value": "30C"}]}]
}


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class E2ERun:
    """Spawns the three services with throwaway keys and configs."""

    def __init__(self, workdir: Path, status_ttl: float = 0.2):
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.status_ttl = status_ttl
        self.processes = []
        self.admin_key = secrets.token_urlsafe(16)
        self.store_key = secrets.token_urlsafe(16)
        self.owner = "owner-1"
        self.client_id = "client-1"
        self.client_secret = secrets.token_urlsafe(16)

    def _write_json(self, name: str, body: dict) -> Path:
        path = self.workdir / name
        path.write_text(json.dumps(body, indent=2))
        return path

    def setup(self):
        from cryptography.hazmat.primitives import serialization

        self.issuer_port = _free_port()
        self.gateway_port = _free_port()
        self.proxy_port = _free_port()
        self.issuer_url = f"http://127.0.0.1:{self.issuer_port}"
        self.gateway_url = f"http://127.0.0.1:{self.gateway_port}"
        self.proxy_url = f"http://127.0.0.1:{self.proxy_port}"

        self.issuer_key = jose.generate_p256_key()
        pem = self.issuer_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        key_path = self.workdir / "issuer-key.pem"
        key_path.write_bytes(pem)

        self.transcoder_kp = mmsig.keygen(key_id="owner-key-1")
        save_keyfile(self.workdir / "transcoder-key.json", self.transcoder_kp)
        self.holder_key = jose.generate_p256_key()

        issuer_cfg = self._write_json(
            "issuer.json",
            {
                "issuer_uri": self.issuer_url,
                "signing_key_path": str(key_path),
                "admin_key": self.admin_key,
                "state_dir": str(self.workdir / "issuer-state"),
                "vc_lifetime_seconds": 3600,
                "host": "127.0.0.1",
                "port": self.issuer_port,
            },
        )
        gateway_cfg = self._write_json(
            "gateway.json",
            {
                "storage_dir": str(self.workdir / "store"),
                "api_key": self.store_key,
                "proxy_base_url": self.proxy_url,
                "devices": {
                    "monitor-1": {"title": "Environment monitor", "owner": self.owner}
                },
                "signers": {
                    self.transcoder_kp.key_id: {
                        "publicKey": b64url_encode(self.transcoder_kp.public_key),
                        "owner": self.owner,
                    }
                },
                "host": "127.0.0.1",
                "port": self.gateway_port,
            },
        )
        proxy_cfg = self._write_json(
            "proxy.json",
            {
                "owner_id": self.owner,
                "gateway_url": self.gateway_url,
                "status_list_url": f"{self.issuer_url}/credentials/status/1",
                "external_base_url": self.proxy_url,
                "trusted_issuers": [
                    {"iss": self.issuer_url, "jwk": jose.jwk_from_key(self.issuer_key)}
                ],
                "signer_keys": {
                    self.transcoder_kp.key_id: b64url_encode(
                        self.transcoder_kp.public_key
                    )
                },
                "status_ttl_seconds": self.status_ttl,
                "status_grace_seconds": 300.0,
                "host": "127.0.0.1",
                "port": self.proxy_port,
            },
        )
        for module, cfg in (
            ("fieldshare.issuer", issuer_cfg),
            ("fieldshare.gateway", gateway_cfg),
            ("fieldshare.proxy", proxy_cfg),
        ):
            self.processes.append(
                subprocess.Popen(
                    [sys.executable, "-m", module, "--config", str(cfg)],
                    stdout=subprocess.DEVNULL,
                    stderr=subprocess.DEVNULL,
                )
            )
        self._wait_healthy()

    def _wait_healthy(self, timeout: float = 30.0):
        deadline = time.time() + timeout
        pending = {self.issuer_url, self.gateway_url, self.proxy_url}
        with httpx.Client(timeout=1.0) as client:
            while pending and time.time() < deadline:
                for url in sorted(pending):
                    try:
                        if client.get(f"{url}/healthz").status_code == 200:
                            pending.discard(url)
                    except httpx.HTTPError:
                        pass
                if pending:
                    time.sleep(0.1)
        if pending:
            raise RuntimeError(f"services failed to start: {sorted(pending)}")

    def teardown(self):
        for proc in self.processes:
            proc.terminate()
        for proc in self.processes:
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()


def run_e2e(workdir=None, status_ttl: float = 0.2) -> list:
    """Full-system scenario; returns a list of {step, ok, detail} dicts."""
    steps = []

    def step(name, ok, detail=""):
        steps.append({"step": name, "ok": bool(ok), "detail": str(detail)})
        return ok

    own_dir = workdir is None
    if own_dir:
        tmp = tempfile.TemporaryDirectory(prefix="fieldshare-e2e-")
        workdir = tmp.name
    run = E2ERun(Path(workdir), status_ttl=status_ttl)
    try:
        run.setup()
        step("services started", True, f"issuer={run.issuer_url}")
        http = httpx.Client(timeout=10.0)

        # owner setup
        admin = {"X-Admin-Key": run.admin_key}
        r1 = http.post(
            f"{run.issuer_url}/admin/clients",
            json={"clientId": run.client_id, "clientSecret": run.client_secret},
            headers=admin,
        )
        r2 = http.post(
            f"{run.issuer_url}/admin/policies",
            json={
                "clientId": run.client_id,
                "ownerId": run.owner,
                "capabilities": {"monitor-1": ["temperature"]},
            },
            headers=admin,
        )
        r3 = http.post(
            f"{run.issuer_url}/admin/trust",
            json={
                "ownerId": run.owner,
                "issuers": [
                    {"iss": run.issuer_url, "jwk": jose.jwk_from_key(run.issuer_key)}
                ],
            },
            headers=admin,
        )
        step(
            "owner setup",
            r1.status_code == r2.status_code == r3.status_code == 200,
            f"{r1.status_code}/{r2.status_code}/{r3.status_code}",
        )

        # transcode + upload
        doc = transcode(LISTING_READINGS)
        receipt = sign_and_upload(
            doc, run.transcoder_kp, run.gateway_url, run.store_key
        )
        step(
            "transcode and upload",
            receipt.get("canonicalCount") == 7,
            json.dumps(receipt),
        )

        # token issuance
        proof = jose.sign_compact(
            {
                "client_id": run.client_id,
                "iat": int(time.time()),
                "nonce": secrets.token_urlsafe(8),
            },
            run.holder_key,
        )
        token_response = http.post(
            f"{run.issuer_url}/token",
            data={
                "grant_type": "client_credentials",
                "client_id": run.client_id,
                "client_secret": run.client_secret,
                "authorization_details": json.dumps(
                    [
                        {
                            "type": "capability-credential",
                            "jwk": jose.jwk_from_key(run.holder_key),
                            "keyProof": proof,
                        }
                    ]
                ),
            },
        )
        ok = token_response.status_code == 200
        vc_jwt = token_response.json().get("access_token") if ok else None
        step("token issuance", ok and vc_jwt, f"status={token_response.status_code}")

        data_uri = f"{run.proxy_url}/data"

        def make_dpop(method="POST", uri=None):
            return credential.create_dpop(
                run.holder_key, method, uri or data_uri, time.time()
            )

        def request(fields, device="monitor-1", vc=vc_jwt, dpop=None, method="POST"):
            headers = {}
            if vc:
                headers["Authorization"] = f"DPoP {vc}"
            headers["DPoP"] = dpop or make_dpop(method="POST")
            return http.post(
                f"{data_uri}?deviceID={device}", json={"fields": fields}, headers=headers
            )

        # authorized request
        response = request(["temperature"])
        envelope = response.json() if response.status_code == 200 else {}
        step(
            "authorized request",
            response.status_code == 200,
            f"status={response.status_code}",
        )

        display_ok = envelope.get("display") == LISTING_OUTPUT
        step("display equals framed output", display_ok, json.dumps(envelope.get("display")))

        key_body = http.get(
            f"{run.proxy_url}/keys/{envelope.get('signerKeyId', '')}"
        )
        signer_pk = (
            jose.b64url_decode(key_body.json()["publicKey"])
            if key_body.status_code == 200
            else b""
        )
        step(
            "envelope proof verifies",
            bool(signer_pk) and verify_envelope(envelope, signer_pk),
            f"signer={envelope.get('signerKeyId')}",
        )

        # negative: unauthorized field
        response = request(["humidity"])
        step(
            "humidity request rejected 403",
            response.status_code == 403,
            f"status={response.status_code}",
        )

        # negative: unknown device
        response = request(["temperature"], device="monitor-9")
        step(
            "unknown device rejected 403",
            response.status_code == 403,
            f"status={response.status_code}",
        )

        # negative: missing credential
        response = request(["temperature"], vc=None)
        step(
            "missing credential rejected 401",
            response.status_code == 401,
            f"status={response.status_code}",
        )

        # negative: replayed DPoP
        dpop = make_dpop()
        first = request(["temperature"], dpop=dpop)
        replay = request(["temperature"], dpop=dpop)
        step(
            "replayed proof rejected 401",
            first.status_code == 200 and replay.status_code == 401,
            f"first={first.status_code} replay={replay.status_code}",
        )

        # negative: DPoP bound to the wrong URI
        response = request(["temperature"], dpop=make_dpop(uri=f"{run.proxy_url}/else"))
        step(
            "mismatched proof rejected 401",
            response.status_code == 401,
            f"status={response.status_code}",
        )

        # negative: expired credential (original validity window has passed)
        expired_jwt = credential.encode_vc(
            credential.CapabilityVC(
                jti=f"{run.issuer_url}/credentials/expired",
                iss=run.issuer_url,
                aud=run.owner,
                iat=1617559370,
                exp=1618423370,
                cnf_jwk=jose.jwk_from_key(run.holder_key),
                capabilities={"monitor-1": ["temperature"]},
                revocation_list_index=0,
                status_list_url=f"{run.issuer_url}/credentials/status/1",
            ),
            run.issuer_key,
        )
        response = request(["temperature"], vc=expired_jwt)
        step(
            "expired credential rejected 401",
            response.status_code == 401,
            f"status={response.status_code}",
        )

        # negative: revocation
        jti = credential.decode_vc(vc_jwt).jti
        revoke = http.post(
            f"{run.issuer_url}/revoke", json={"jti": jti}, headers=admin
        )
        time.sleep(max(0.3, run.status_ttl + 0.1))
        response = request(["temperature"])
        step(
            "revoked credential rejected 401",
            revoke.status_code == 200 and response.status_code == 401,
            f"revoke={revoke.status_code} request={response.status_code}",
        )
        http.close()
    except Exception as exc:  # orchestration failure fails the run with the step name
        step("orchestration", False, repr(exc))
    finally:
        run.teardown()
        if own_dir:
            tmp.cleanup()
    return steps


# --- CLI -------------------------------------------------------------------------


@click.group()
def main():
    """Benchmark and end-to-end scenario runner."""


@main.command()
@click.option("--fields", default=100, show_default=True)
@click.option("--reps", default=20, show_default=True)
@click.option("--out", default="bench.csv", show_default=True)
@click.option("--json-out", default=None, help="also write a plot-ready JSON series")
@click.option("--seed", default=0, show_default=True)
@click.option("--min-k", default=1, show_default=True)
@click.option("--max-k", default=None, type=int, help="default: fields - 1, capped at 99")
def bench(fields, reps, out, json_out, seed, min_k, max_k):
    """Sweep revealed-field counts over one signed document."""
    doc = gen_doc(fields, seed=seed)
    top = max_k if max_k is not None else min(99, fields - 1)
    counts = list(range(min_k, top + 1))
    click.echo(
        f"benchmark: {fields} fields "
        f"({canonicalize(doc).count} canonical messages), k={min_k}..{top}, {reps} reps"
    )

    def progress(record):
        click.echo(
            f"  k={record.revealed_count:3d} prove={record.prove_ms:8.2f} ms "
            f"verify={record.verify_ms:8.2f} ms proof={record.proof_bytes} B"
        )

    started = time.perf_counter()
    records = run_bench(doc, counts, repetitions=reps, progress=progress)
    elapsed = time.perf_counter() - started
    write_bench_csv(records, out)
    if json_out:
        write_bench_json(
            records,
            json_out,
            meta={"fields": fields, "reps": reps, "seed": seed, "elapsed_s": elapsed},
        )
    click.echo(f"wrote {out} ({elapsed:.1f}s total)")


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def e2e(config_path):
    """Run the full-system scenario against freshly started local services."""
    options = {}
    if config_path:
        options = json.loads(Path(config_path).read_text())
    steps = run_e2e(
        workdir=options.get("workdir"),
        status_ttl=float(options.get("status_ttl", 0.2)),
    )
    failed = [s for s in steps if not s["ok"]]
    for s in steps:
        mark = "PASS" if s["ok"] else "FAIL"
        click.echo(f"[{mark}] {s['step']}" + (f" - {s['detail']}" if s["detail"] else ""))
    if failed:
        raise SystemExit(1)
    click.echo(f"all {len(steps)} steps passed")


if __name__ == "__main__":
    main()
