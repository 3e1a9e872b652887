import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldshare.canonical import JsonPath, canonicalize, canonicalize_sparse
from fieldshare.framing import (
    EmptyFieldList,
    FrameShapeMismatch,
    InconsistentPaths,
    MessageNotFound,
    SparseSubItem,
    apply_frame,
    frame_from_fields,
    reconstruct,
    reveal_indices,
)
from strategies import json_documents

TEMPERATURE_FRAME = {
    "measurements": {
        "*": {
            "field": "temperature",
            "values": {"*": {"value": ""}},
        }
    }
}


def same_leaf(node, value):
    from fieldshare.canonical import EMPTY_ARRAY, EMPTY_OBJECT

    if value is EMPTY_OBJECT:
        return node == {}
    if value is EMPTY_ARRAY:
        return node == []
    return node is value or node == value


def test_temperature_frame_output(measurement_doc):
    sub = apply_frame(measurement_doc, TEMPERATURE_FRAME)
    assert [(p.segments, v) for p, v in sub.revealed] == [
        (("measurements", 0, "field"), "temperature"),
        (("measurements", 0, "values", 0, "value"), "30C"),
    ]


def test_empty_frame_selects_nothing(measurement_doc):
    assert len(apply_frame(measurement_doc, {})) == 0


def test_humidity_selection(measurement_doc):
    sub = apply_frame(measurement_doc, frame_from_fields(["humidity"]))
    assert [(p.segments, v) for p, v in sub.revealed] == [
        (("measurements", 1, "field"), "humidity"),
        (("measurements", 1, "values", 0, "value"), "50"),
    ]


def test_frame_from_fields_single_is_plain_frame():
    assert frame_from_fields(["temperature"]) == TEMPERATURE_FRAME


def test_frame_from_fields_union(measurement_doc):
    both = apply_frame(measurement_doc, frame_from_fields(["temperature", "humidity"]))
    single = set()
    for name in ("temperature", "humidity"):
        for path, value in apply_frame(measurement_doc, frame_from_fields([name])).revealed:
            single.add((path.segments, value))
    assert {(p.segments, v) for p, v in both.revealed} == single
    assert len(both) == 4


def test_frame_from_fields_rejects_empty():
    with pytest.raises(EmptyFieldList):
        frame_from_fields([])
    with pytest.raises(EmptyFieldList):
        frame_from_fields([""])


def test_unsatisfied_constraint_contributes_nothing(measurement_doc):
    sub = apply_frame(measurement_doc, frame_from_fields(["pressure"]))
    assert len(sub) == 0


def test_absent_key_is_not_an_error(measurement_doc):
    assert len(apply_frame(measurement_doc, {"nonexistent": ""})) == 0


def test_wildcard_over_non_array_is_shape_mismatch(measurement_doc):
    with pytest.raises(FrameShapeMismatch):
        apply_frame(measurement_doc, {"deviceID": {"*": {"x": ""}}})


def test_constraint_type_sensitivity():
    doc = {"a": [{"k": "50", "v": 1}, {"k": 50, "v": 2}]}
    sub = apply_frame(doc, {"a": {"*": {"k": 50, "v": ""}}})
    assert [(p.segments, v) for p, v in sub.revealed] == [
        (("a", 1, "k"), 50),
        (("a", 1, "v"), 2),
    ]


def test_reveal_marker_over_subtree():
    doc = {"a": {"x": 1, "y": [2, 3]}, "b": 9}
    sub = apply_frame(doc, {"a": ""})
    assert [(p.segments, v) for p, v in sub.revealed] == [
        (("a", "x"), 1),
        (("a", "y", 0), 2),
        (("a", "y", 1), 3),
    ]


def test_reveal_indices_full_and_empty(measurement_doc):
    canon = canonicalize(measurement_doc)
    everything = SparseSubItem(
        revealed=tuple((m.path, m.value) for m in canon.messages)
    )
    assert reveal_indices(canon, everything) == tuple(range(canon.count))
    assert reveal_indices(canon, SparseSubItem(revealed=())) == ()


def test_reveal_indices_listing_output(measurement_doc):
    canon = canonicalize(measurement_doc)
    sub = apply_frame(measurement_doc, TEMPERATURE_FRAME)
    idx = reveal_indices(canon, sub)
    # independent oracle: linear scan over encodings
    from fieldshare.canonical import encode_message

    expected = tuple(
        sorted(
            next(
                i
                for i, m in enumerate(canon.messages)
                if m.encoding == encode_message(p, v)
            )
            for p, v in sub.revealed
        )
    )
    assert idx == expected == (1, 3)


def test_reveal_indices_foreign_pair_raises(measurement_doc):
    canon = canonicalize(measurement_doc)
    alien = SparseSubItem(revealed=((JsonPath(("deviceID",)), "другой"),))
    with pytest.raises(MessageNotFound):
        reveal_indices(canon, alien)


def test_reconstruct_listing_output(measurement_doc):
    sub = apply_frame(measurement_doc, TEMPERATURE_FRAME)
    item = reconstruct(sub)
    assert item.document == {
        "measurements": [{"field": "temperature", "values": [{"value": "30C"}]}]
    }
    originals = {orig.segments for _, orig in item.path_map}
    assert originals == {
        ("measurements", 0, "field"),
        ("measurements", 0, "values", 0, "value"),
    }


def test_reconstruct_compacts_indices():
    sub = SparseSubItem(
        revealed=(
            (JsonPath(("xs", 2, "v")), "b"),
            (JsonPath(("xs", 5, "v")), "c"),
        )
    )
    item = reconstruct(sub)
    assert item.document == {"xs": [{"v": "b"}, {"v": "c"}]}
    mapping = {d.segments: o.segments for d, o in item.path_map}
    assert mapping == {
        ("xs", 0, "v"): ("xs", 2, "v"),
        ("xs", 1, "v"): ("xs", 5, "v"),
    }


def test_reconstruct_trivial_cases():
    assert reconstruct(SparseSubItem(revealed=())).document == {}
    single = SparseSubItem(revealed=((JsonPath(("deviceID",)), "monitor-1"),))
    assert reconstruct(single).document == {"deviceID": "monitor-1"}


def test_reconstruct_rejects_prefix_paths():
    sub = SparseSubItem(
        revealed=(
            (JsonPath(("a",)), 1),
            (JsonPath(("a", "b")), 2),
        )
    )
    with pytest.raises(InconsistentPaths):
        reconstruct(sub)


def test_reconstruct_rejects_kind_conflicts():
    sub = SparseSubItem(
        revealed=(
            (JsonPath(("a", 0)), 1),
            (JsonPath(("a", "b")), 2),
        )
    )
    with pytest.raises(InconsistentPaths):
        reconstruct(sub)


# --- randomized soundness / subset laws -----------------------------------


def random_frame(rng, node, depth=0):
    """Random well-formed frame for a document node ('*' only over arrays)."""
    frame = {}
    if isinstance(node, dict):
        for key, child in node.items():
            if key == "*":
                continue  # would be parsed as a wildcard, not a key
            roll = rng.random()
            if roll < 0.30:
                continue
            if roll < 0.55:
                frame[key] = ""
            elif roll < 0.70 and not isinstance(child, (dict, list)):
                # half satisfied / half failing constraints
                frame[key] = child if rng.random() < 0.5 else "__nope__"
            elif isinstance(child, (dict, list)) and depth < 4:
                frame[key] = random_frame(rng, child, depth + 1)
            else:
                frame[key] = ""
        if rng.random() < 0.2:
            frame["missing-" + str(rng.randrange(10))] = ""
    elif isinstance(node, list):
        template = node[rng.randrange(len(node))] if node else {}
        frame["*"] = random_frame(rng, template, depth + 1)
    return frame


def test_randomized_soundness_and_subset_law():
    rng = random.Random(20260809)
    from strategies import json_documents as docs_strategy  # noqa: F401

    cases = 0
    while cases < 1000:
        doc = random_doc(rng, depth=-1)  # force a container root
        frame = random_frame(rng, doc)
        try:
            sub = apply_frame(doc, frame)
        except FrameShapeMismatch:
            # heterogeneous array under a wildcard: frame not well-formed for
            # this document, which the operation's precondition excludes
            continue
        canon = canonicalize(doc)
        encs = set(canon.encodings())
        for path, value in sub.revealed:
            found, node = lookup_safe(doc, path.segments)
            assert found and same_leaf(node, value)
        sparse = canonicalize_sparse(sub.revealed)
        assert {m.encoding for m in sparse.messages} <= encs
        # reveal_indices round-trips
        idx = reveal_indices(canon, sub)
        assert len(idx) == len(sub)
        cases += 1
    assert cases == 1000


def random_doc(rng, depth=0):
    if depth >= 3 or (depth >= 0 and rng.random() < 0.35):
        return rng.choice(
            ["30C", "50", 17, 3.5, True, False, None, "x" * rng.randrange(3)]
        )
    if rng.random() < 0.5:
        return {
            f"k{idx}": random_doc(rng, depth + 1) for idx in range(rng.randrange(1, 4))
        }
    return [random_doc(rng, depth + 1) for _ in range(rng.randrange(1, 4))]


def lookup_safe(doc, segments):
    node = doc
    for seg in segments:
        try:
            node = node[seg]
        except (KeyError, IndexError, TypeError):
            return (False, None)
    return (True, node)


@given(doc=json_documents, seed=st.integers(0, 2**32 - 1))
def test_monotonic_reveal(doc, seed):
    if not isinstance(doc, dict) or not doc:
        return
    rng = random.Random(seed)
    frame = random_frame(rng, doc)
    try:
        base = {
            (p.segments, canonical_key(v)) for p, v in apply_frame(doc, frame).revealed
        }
    except FrameShapeMismatch:
        return
    # add one extra reveal marker for a key the frame does not mention
    unmentioned = [k for k in doc if k not in frame]
    if not unmentioned:
        return
    widened = dict(frame)
    widened[rng.choice(unmentioned)] = ""
    wider = {
        (p.segments, canonical_key(v)) for p, v in apply_frame(doc, widened).revealed
    }
    assert base <= wider


def canonical_key(value):
    from fieldshare.canonical import canonical_literal

    return canonical_literal(value)
