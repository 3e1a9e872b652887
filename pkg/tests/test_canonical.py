import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldshare import canonical
from fieldshare.canonical import (
    EMPTY_ARRAY,
    EMPTY_OBJECT,
    CanonicalForm,
    DepthExceeded,
    DuplicateKey,
    JsonPath,
    MalformedMessage,
    NonFiniteNumber,
    canonicalize,
    canonicalize_sparse,
    decode_message,
    encode_message,
)
from strategies import json_documents, json_primitives

# Independent leaf enumeration: counts primitives plus empty containers below
# the root, without touching the canonical path machinery.


def count_leaves(node, at_root=True):
    if isinstance(node, dict):
        if not node:
            return 0 if at_root else 1
        return sum(count_leaves(v, False) for v in node.values())
    if isinstance(node, list):
        if not node:
            return 0 if at_root else 1
        return sum(count_leaves(v, False) for v in node)
    return 1


def test_empty_document_has_no_messages():
    assert canonicalize({}).count == 0
    assert canonicalize([]).count == 0


def test_single_leaf():
    form = canonicalize({"a": 1})
    assert form.count == 1
    assert form.messages[0].encoding == b'"a"=1'
    assert form.messages[0].path.segments == ("a",)


def test_measurement_doc_messages(measurement_doc):
    form = canonicalize(measurement_doc)
    assert form.count == count_leaves(measurement_doc) == 7
    assert form.encodings() == [
        b'"deviceID"="monitor-1"',
        b'"measurements"[0]"field"="temperature"',
        b'"measurements"[0]"values"[0]"time"="1658162155"',
        b'"measurements"[0]"values"[0]"value"="30C"',
        b'"measurements"[1]"field"="humidity"',
        b'"measurements"[1]"values"[0]"time"="1658162155"',
        b'"measurements"[1]"values"[0]"value"="50"',
    ]


def test_device_id_message_decodes(measurement_doc):
    form = canonicalize(measurement_doc)
    path, value = decode_message(form.messages[0].encoding)
    assert path.segments == ("deviceID",)
    assert value == "monitor-1"


def test_encode_examples():
    assert encode_message(JsonPath(("a",)), 1) == b'"a"=1'
    assert (
        encode_message(JsonPath(("measurements", 0, "field")), "temperature")
        == b'"measurements"[0]"field"="temperature"'
    )


def test_dotted_key_distinct_from_nested():
    one = encode_message(JsonPath(("a.b",)), 1)
    two = encode_message(JsonPath(("a", "b")), 1)
    assert one != two


def test_quote_and_backslash_keys_roundtrip():
    path = JsonPath(('he said "hi"', "back\\slash", 3))
    enc = encode_message(path, None)
    dec_path, dec_value = decode_message(enc)
    assert dec_path == path
    assert dec_value is None


def test_decode_truncated_is_malformed(measurement_doc):
    enc = canonicalize(measurement_doc).messages[1].encoding
    for cut in (1, 5, len(enc) - 1):
        with pytest.raises(MalformedMessage):
            decode_message(enc[:cut])


def test_decode_rejects_garbage():
    with pytest.raises(MalformedMessage):
        decode_message(b"no-quotes=1")
    with pytest.raises(MalformedMessage):
        decode_message(b'"a"')
    with pytest.raises(MalformedMessage):
        decode_message(b'"a"={"x":1}')
    with pytest.raises(MalformedMessage):
        decode_message(b"\xff\xfe")


def test_duplicate_key_rejected():
    with pytest.raises(DuplicateKey):
        canonicalize('{"a": 1, "a": 2}')


def test_non_finite_rejected():
    with pytest.raises(NonFiniteNumber):
        canonicalize({"a": float("nan")})
    with pytest.raises(NonFiniteNumber):
        canonicalize({"a": float("inf")})


def test_depth_limit():
    doc = {}
    node = doc
    for _ in range(70):
        node["x"] = {}
        node = node["x"]
    node["leaf"] = 1
    with pytest.raises(DepthExceeded):
        canonicalize(doc)
    assert canonicalize(doc, max_depth=100).count == 1


def test_empty_containers_get_reserved_tags():
    form = canonicalize({"a": {}, "b": []})
    assert form.encodings() == [b'"a"={}', b'"b"=[]']
    # distinct from string values spelled the same way
    assert canonicalize({"a": "{}"}).encodings() == [b'"a"="{}"']
    path, value = decode_message(b'"a"={}')
    assert value is EMPTY_OBJECT
    assert decode_message(b'"b"=[]')[1] is EMPTY_ARRAY


def test_number_rendering():
    assert canonicalize({"a": -0.0}).encodings() == [b'"a"=0']
    assert canonicalize({"a": 30.0}).encodings() == [b'"a"=30']
    assert canonicalize({"a": 1e300}).encodings() == [b'"a"=1e300']
    assert canonicalize({"a": 1e-5}).encodings() == [b'"a"=1e-5']
    assert canonicalize({"a": 0.5}).encodings() == [b'"a"=0.5']


def test_determinism_across_insertion_order():
    a = canonicalize({"x": 1, "y": {"b": 2, "a": 3}})
    b = canonicalize({"y": {"a": 3, "b": 2}, "x": 1})
    assert a.encodings() == b.encodings()


def test_key_order_is_byte_order():
    # 'Z' (0x5a) sorts before 'a' (0x61)
    form = canonicalize({"a": 1, "Z": 2})
    assert form.encodings() == [b'"Z"=2', b'"a"=1']


@given(doc=json_documents)
def test_count_matches_independent_enumeration(doc):
    assert canonicalize(doc).count == count_leaves(doc)


@given(doc=json_documents)
def test_injectivity_within_document(doc):
    encs = canonicalize(doc).encodings()
    assert len(encs) == len(set(encs))


@given(doc=json_documents)
def test_messages_sorted_and_stable(doc):
    form = canonicalize(doc)
    keys = [m.path.sort_key() for m in form.messages]
    assert keys == sorted(keys)
    again = canonicalize(json.loads(json.dumps(doc)))
    assert again.encodings() == form.encodings()


@given(doc=json_documents, data=st.data())
def test_subset_stability(doc, data):
    form = canonicalize(doc)
    if form.count == 0:
        return
    subset = data.draw(st.sets(st.integers(0, form.count - 1)))
    pairs = [(form.messages[i].path, form.messages[i].value) for i in sorted(subset)]
    sparse = canonicalize_sparse(pairs)
    assert [m.encoding for m in sparse.messages] == [
        form.messages[i].encoding for i in sorted(subset)
    ]


@given(doc=json_documents)
def test_roundtrip_decode(doc):
    for msg in canonicalize(doc).messages:
        path, value = decode_message(msg.encoding)
        assert path == msg.path
        if isinstance(msg.value, float) and msg.value == int(msg.value):
            assert value == msg.value
        else:
            assert type(value) is type(msg.value) or value is msg.value
            assert value == msg.value or (value is msg.value)


@given(
    segs=st.lists(
        st.one_of(st.text(min_size=1, max_size=6), st.integers(0, 50)),
        min_size=1,
        max_size=5,
    ),
    value=json_primitives,
)
def test_encode_decode_inverse_on_random_paths(segs, value):
    path = JsonPath(tuple(segs))
    got_path, got_value = decode_message(encode_message(path, value))
    assert got_path == path
    assert canonical_equal(got_value, value)


def canonical_equal(a, b):
    return canonical.canonical_literal(a) == canonical.canonical_literal(b)
