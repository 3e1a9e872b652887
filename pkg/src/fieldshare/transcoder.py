"""Owner-side transcoder: raw readings in, signed measurement documents out.

Readings (device, field, value, time) are grouped into the measurement schema
- one ``measurements`` entry per distinct field, values kept verbatim as
strings - then the canonical form is signed with the owner's multi-message key
and uploaded to the storage node.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import click
import httpx

from . import mmsig
from .canonical import canonicalize
from .jose import b64url_decode, b64url_encode


class TranscoderError(Exception):
    pass


class EmptyInput(TranscoderError):
    pass


class MixedDevices(TranscoderError):
    pass


class SigningFailed(TranscoderError):
    pass


class UploadFailed(TranscoderError):
    pass


@dataclass(frozen=True)
class RawReading:
    device_id: str
    field: str
    value: str
    time: int

    def __post_init__(self):
        if not (self.device_id and self.field and self.value):
            raise TranscoderError(f"reading has empty fields: {self!r}")
        if self.time <= 0:
            raise TranscoderError(f"reading time must be positive: {self!r}")


def transcode(readings) -> dict:
    """Measurement document with one entry per distinct field, input order kept."""
    readings = list(readings)
    if not readings:
        raise EmptyInput("no readings to transcode")
    devices = {r.device_id for r in readings}
    if len(devices) > 1:
        raise MixedDevices(f"readings span devices {sorted(devices)}")
    by_field: dict = {}
    for r in readings:
        by_field.setdefault(r.field, []).append(
            {"time": str(r.time), "value": r.value}
        )
    return {
        "deviceID": readings[0].device_id,
        "measurements": [
            {"field": field, "values": values} for field, values in by_field.items()
        ],
    }


def parse_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RawReading(
            device_id=row["device_id"],
            field=row["field"],
            value=row["value"],
            time=int(row["time"]),
        )
        for row in rows
    ]


def parse_jsonl(path) -> list:
    readings = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            readings.append(
                RawReading(
                    device_id=row["device_id"],
                    field=row["field"],
                    value=str(row["value"]),
                    time=int(row["time"]),
                )
            )
    return readings


def load_keyfile(path) -> mmsig.SignerKeyPair:
    from fieldshare.mmsig.curve import G2_GEN, g2_compress, g2_mul

    data = json.loads(Path(path).read_text())
    secret = int.from_bytes(b64url_decode(data["secretKey"]), "big")
    return mmsig.SignerKeyPair(
        secret_key=secret,
        public_key=g2_compress(g2_mul(G2_GEN, secret)),
        key_id=data["keyId"],
    )


def save_keyfile(path, keypair: mmsig.SignerKeyPair):
    Path(path).write_text(
        json.dumps(
            {
                "keyId": keypair.key_id,
                "secretKey": b64url_encode(int(keypair.secret_key).to_bytes(32, "big")),
                "publicKey": b64url_encode(keypair.public_key),
            },
            indent=2,
        )
    )


def sign_document(doc: dict, keypair: mmsig.SignerKeyPair):
    """Returns (signature, canonical message count) for a measurement document."""
    form = canonicalize(doc)
    if form.count == 0:
        raise SigningFailed("document has no canonical messages")
    try:
        sig = mmsig.sign(keypair, form.encodings())
    except mmsig.SchemeError as exc:
        raise SigningFailed(str(exc)) from exc
    return sig, form.count


def sign_and_upload(
    doc: dict,
    keypair: mmsig.SignerKeyPair,
    store_url: str,
    api_key: str,
    client: httpx.Client | None = None,
) -> dict:
    """Sign, upload, and return the storage receipt."""
    sig, count = sign_document(doc, keypair)
    body = {
        "doc": doc,
        "signature": b64url_encode(sig.data),
        "signerKeyId": keypair.key_id,
    }
    device_id = doc["deviceID"]
    own_client = client is None
    if own_client:
        client = httpx.Client(base_url=store_url, timeout=10.0)
    try:
        response = client.post(
            f"/store/{device_id}", json=body, headers={"X-Api-Key": api_key}
        )
    except httpx.HTTPError as exc:
        raise UploadFailed(f"storage unreachable: {exc}") from exc
    finally:
        if own_client:
            client.close()
    if response.status_code != 200:
        raise UploadFailed(
            f"storage rejected document ({response.status_code}): {response.text}"
        )
    receipt = response.json()
    if receipt.get("canonicalCount") != count:
        raise UploadFailed("storage receipt count disagrees with local canonical form")
    return receipt


@click.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--store-url", default=None, help="storage node base URL")
@click.option("--store-key", default="", help="storage node API key")
@click.option("--dry-run", is_flag=True, help="print the signed document, no upload")
def main(input_path, fmt, key_path, store_url, store_key, dry_run):
    """Transcode raw readings, sign the document, and upload it."""
    readings = parse_csv(input_path) if fmt == "csv" else parse_jsonl(input_path)
    doc = transcode(readings)
    keypair = load_keyfile(key_path)
    if dry_run:
        sig, count = sign_document(doc, keypair)
        click.echo(
            json.dumps(
                {
                    "doc": doc,
                    "signature": b64url_encode(sig.data),
                    "signerKeyId": keypair.key_id,
                    "canonicalCount": count,
                },
                indent=2,
            )
        )
        return
    if not store_url:
        raise click.UsageError("--store-url is required unless --dry-run")
    receipt = sign_and_upload(doc, keypair, store_url, store_key)
    click.echo(json.dumps(receipt))


if __name__ == "__main__":
    main()
