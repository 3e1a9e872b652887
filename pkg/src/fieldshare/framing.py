"""Frame application: derive a sub-item from a document and locate its messages.

A frame is a JSON-shaped selector. Inside a frame object:

* a key mapped to ``""`` reveals the leaf (or every leaf of the subtree) at
  that key;
* a key mapped to a non-empty primitive is a constraint: the document value
  must equal it, and the matching value is itself revealed;
* the key ``"*"`` requires the document node to be an array and applies the
  inner frame to every element, keeping elements that satisfy its
  constraints;
* nested objects recurse.

A list of frame objects is a disjunction: the union of what each alternative
selects. Keys absent from the document select nothing; only ``"*"`` over a
non-array is a shape error. Constraint failures silently drop the enclosing
scope, so a frame matching nothing yields an empty (still provable) sub-item.
"""

from __future__ import annotations

from dataclasses import dataclass

from .canonical import (
    EMPTY_ARRAY,
    EMPTY_OBJECT,
    CanonicalForm,
    JsonPath,
    canonical_literal,
    iter_leaves,
)

REVEAL = ""
WILDCARD = "*"


class FrameError(Exception):
    """Base class for framing failures."""


class FrameShapeMismatch(FrameError):
    """Frame structure is incompatible with the document (or malformed)."""


class MessageNotFound(FrameError):
    """A revealed pair does not exist in the canonical form it is matched against."""


class EmptyFieldList(FrameError):
    """A field-based frame needs at least one field name."""


class InconsistentPaths(FrameError):
    """Revealed paths cannot form a single document (prefix or kind conflicts)."""


@dataclass(frozen=True)
class SparseSubItem:
    """Leaves revealed by a frame, with their original document paths."""

    revealed: tuple  # of (JsonPath, value), sorted by path order

    def __len__(self) -> int:
        return len(self.revealed)

    def paths(self) -> list:
        return [path for path, _ in self.revealed]


def _is_primitive(value) -> bool:
    return value is None or isinstance(value, (bool, int, float, str))


def _primitive_equal(a, b) -> bool:
    if not (_is_primitive(a) and _is_primitive(b)):
        return False
    return canonical_literal(a) == canonical_literal(b)


def _subtree_leaves(node, prefix: tuple, out: list):
    if prefix and isinstance(node, dict) and not node:
        out.append((prefix, EMPTY_OBJECT))
        return
    if prefix and isinstance(node, list) and not node:
        out.append((prefix, EMPTY_ARRAY))
        return
    for segs, value in iter_leaves(node):
        out.append((prefix + segs, value))


def _apply(frame, node, prefix: tuple, out: list):
    if isinstance(frame, list):
        for alternative in frame:
            _apply(alternative, node, prefix, out)
        return
    if not isinstance(frame, dict):
        raise FrameShapeMismatch(f"frame node must be an object, got {frame!r}")

    if WILDCARD in frame:
        if not isinstance(node, list):
            raise FrameShapeMismatch(f"'*' applied over non-array at {prefix!r}")
        inner = frame[WILDCARD]
        for idx, element in enumerate(node):
            _apply(inner, element, prefix + (idx,), out)
        rest = {k: v for k, v in frame.items() if k != WILDCARD}
        if rest:
            _apply(rest, node, prefix, out)
        return

    if not isinstance(node, dict):
        return  # object keys never match inside arrays or leaves

    # All constraints of this frame node must hold before it selects anything.
    constraints = [
        (key, want)
        for key, want in frame.items()
        if _is_primitive(want) and want != REVEAL
    ]
    for key, want in constraints:
        if key not in node or not _primitive_equal(node[key], want):
            return
    for key, want in constraints:
        out.append((prefix + (key,), node[key]))

    for key, sub in frame.items():
        if _is_primitive(sub):
            if sub == REVEAL and key in node:
                _subtree_leaves(node[key], prefix + (key,), out)
        elif key in node:
            _apply(sub, node[key], prefix + (key,), out)


def apply_frame(doc, frame) -> SparseSubItem:
    """Select the sub-item of ``doc`` described by ``frame``."""
    collected: list = []
    _apply(frame, doc, (), collected)
    seen = set()
    pairs = []
    for segs, value in collected:
        if segs in seen:
            continue
        seen.add(segs)
        pairs.append((JsonPath(segs), value))
    pairs.sort(key=lambda pv: pv[0].sort_key())
    return SparseSubItem(revealed=tuple(pairs))


def reveal_indices(canon: CanonicalForm, sub: SparseSubItem) -> tuple:
    """Positions of the sub-item's messages inside the canonical form, ascending."""
    from .canonical import encode_message

    index_of = {msg.encoding: i for i, msg in enumerate(canon.messages)}
    positions = []
    for path, value in sub.revealed:
        enc = encode_message(path, value)
        if enc not in index_of:
            raise MessageNotFound(f"{enc!r} not among the document's messages")
        positions.append(index_of[enc])
    return tuple(sorted(positions))


def frame_from_fields(fields) -> dict:
    """Frame revealing every value of the measurements whose field name is requested.

    Multiple fields become a disjunction of per-field alternatives inside the
    array wildcard, so one frame (and one proof) covers the whole request.
    """
    names = list(dict.fromkeys(fields))
    if not names:
        raise EmptyFieldList("at least one field name is required")
    for name in names:
        if not isinstance(name, str) or not name:
            raise EmptyFieldList(f"bad field name {name!r}")
    alternatives = [
        {"field": name, "values": {WILDCARD: {"value": REVEAL}}} for name in names
    ]
    inner = alternatives[0] if len(alternatives) == 1 else alternatives
    return {"measurements": {WILDCARD: inner}}


@dataclass(frozen=True)
class ReconstructedItem:
    """Display form of a sub-item plus the mapping back to original paths."""

    document: object
    path_map: tuple  # of (display JsonPath, original JsonPath)


class _Node:
    __slots__ = ("kind", "children", "value")

    def __init__(self, kind):
        self.kind = kind  # "obj" | "arr" | "leaf"
        self.children = {}
        self.value = None


def reconstruct(sub: SparseSubItem) -> ReconstructedItem:
    """Rebuild nested JSON from revealed leaves, compacting array indices."""
    root = _Node("obj")
    first = True
    for path, value in sub.revealed:
        node = root
        segs = path.segments
        for depth, seg in enumerate(segs):
            want = "obj" if isinstance(seg, str) else "arr"
            if first and depth == 0:
                root.kind = want
                first = False
            if node.kind == "leaf" or node.kind != want:
                raise InconsistentPaths(f"conflict at {segs[:depth]!r}")
            if depth == len(segs) - 1:
                if seg in node.children:
                    raise InconsistentPaths(f"path {segs!r} occurs twice or is a prefix")
                leaf = _Node("leaf")
                leaf.value = value
                node.children[seg] = leaf
            else:
                nxt = node.children.get(seg)
                if nxt is None:
                    nxt = _Node("obj" if isinstance(segs[depth + 1], str) else "arr")
                    node.children[seg] = nxt
                elif nxt.kind == "leaf":
                    raise InconsistentPaths(f"path prefix conflict at {segs[: depth + 1]!r}")
                node = nxt

    path_map: list = []

    def render(node: _Node, display: tuple, original: tuple):
        if node.kind == "leaf":
            value = node.value
            if value is EMPTY_OBJECT:
                value = {}
            elif value is EMPTY_ARRAY:
                value = []
            path_map.append((JsonPath(display), JsonPath(original)))
            return value
        if node.kind == "obj":
            keys = sorted(node.children, key=lambda k: k.encode("utf-8"))
            return {
                key: render(node.children[key], display + (key,), original + (key,))
                for key in keys
            }
        out = []
        for new_idx, orig_idx in enumerate(sorted(node.children)):
            out.append(
                render(node.children[orig_idx], display + (new_idx,), original + (orig_idx,))
            )
        return out

    document = render(root, (), ()) if sub.revealed else {}
    return ReconstructedItem(document=document, path_map=tuple(path_map))
