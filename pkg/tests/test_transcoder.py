import json

import pytest
from click.testing import CliRunner

from fieldshare import mmsig
from fieldshare.canonical import canonicalize
from fieldshare.transcoder import (
    EmptyInput,
    MixedDevices,
    RawReading,
    TranscoderError,
    UploadFailed,
    load_keyfile,
    main,
    parse_csv,
    parse_jsonl,
    save_keyfile,
    sign_and_upload,
    transcode,
)
from stack import STORE_KEY, make_stack

READINGS = [
    RawReading("monitor-1", "temperature", "30C", 1658162155),
    RawReading("monitor-1", "humidity", "50", 1658162155),
]


def test_transcode_matches_measurement_schema(measurement_doc):
    assert transcode(READINGS) == measurement_doc


def test_transcode_single_reading():
    doc = transcode([READINGS[0]])
    assert doc == {
        "deviceID": "monitor-1",
        "measurements": [
            {"field": "temperature", "values": [{"time": "1658162155", "value": "30C"}]}
        ],
    }


def test_transcode_groups_by_field_in_first_appearance_order():
    readings = [
        RawReading("m", "b_field", "1", 10),
        RawReading("m", "a_field", "2", 11),
        RawReading("m", "b_field", "3", 12),
    ]
    doc = transcode(readings)
    assert [m["field"] for m in doc["measurements"]] == ["b_field", "a_field"]
    assert doc["measurements"][0]["values"] == [
        {"time": "10", "value": "1"},
        {"time": "12", "value": "3"},
    ]


def test_transcode_rejects_mixed_devices():
    with pytest.raises(MixedDevices):
        transcode(READINGS + [RawReading("monitor-2", "x", "1", 5)])


def test_transcode_rejects_empty():
    with pytest.raises(EmptyInput):
        transcode([])


def test_reading_validation():
    with pytest.raises(TranscoderError):
        RawReading("", "f", "v", 1)
    with pytest.raises(TranscoderError):
        RawReading("d", "f", "v", 0)


def test_every_reading_becomes_one_time_value_pair():
    doc = transcode(READINGS)
    pairs = [
        (m["field"], v["time"], v["value"])
        for m in doc["measurements"]
        for v in m["values"]
    ]
    assert sorted(pairs) == sorted(
        (r.field, str(r.time), r.value) for r in READINGS
    )


def test_parse_csv_and_jsonl(tmp_path):
    csv_path = tmp_path / "r.csv"
    csv_path.write_text(
        "device_id,field,value,time\n"
        "monitor-1,temperature,30C,1658162155\n"
        "monitor-1,humidity,50,1658162155\n"
    )
    assert parse_csv(csv_path) == READINGS

    jsonl_path = tmp_path / "r.jsonl"
    jsonl_path.write_text(
        "\n".join(
            json.dumps(
                {"device_id": r.device_id, "field": r.field, "value": r.value, "time": r.time}
            )
            for r in READINGS
        )
    )
    assert parse_jsonl(jsonl_path) == READINGS


def test_keyfile_roundtrip(tmp_path):
    kp = mmsig.keygen(seed=b"transcoder-key-file-roundtrip-01", key_id="owner-key")
    path = tmp_path / "key.json"
    save_keyfile(path, kp)
    loaded = load_keyfile(path)
    assert loaded == kp


def test_sign_and_upload_receipt(tmp_path, measurement_doc):
    stack = make_stack(tmp_path)
    receipt = sign_and_upload(
        measurement_doc, stack.transcoder_kp, "unused", STORE_KEY, client=stack.gateway
    )
    assert receipt["canonicalCount"] == canonicalize(measurement_doc).count == 7
    assert receipt["deviceID"] == "monitor-1"
    assert "storedAt" in receipt


def test_upload_failure_when_storage_rejects(tmp_path, measurement_doc):
    stack = make_stack(tmp_path)
    with pytest.raises(UploadFailed):
        sign_and_upload(
            measurement_doc, stack.transcoder_kp, "unused", "bad-key", client=stack.gateway
        )


def test_upload_failure_when_unreachable(measurement_doc):
    from stack import broken_client

    kp = mmsig.keygen(seed=b"transcoder-key-file-roundtrip-01", key_id="k")
    with pytest.raises(UploadFailed):
        sign_and_upload(measurement_doc, kp, "unused", STORE_KEY, client=broken_client())


def test_cli_dry_run(tmp_path):
    csv_path = tmp_path / "r.csv"
    csv_path.write_text(
        "device_id,field,value,time\nmonitor-1,temperature,30C,1658162155\n"
    )
    key_path = tmp_path / "key.json"
    save_keyfile(key_path, mmsig.keygen(seed=b"cli-dry-run-keypair-0123456789ab"))
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["--input", str(csv_path), "--key", str(key_path), "--dry-run"],
    )
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert out["doc"]["deviceID"] == "monitor-1"
    assert out["canonicalCount"] == 4
