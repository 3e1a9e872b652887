"""Deterministic serialization of JSON documents into ordered path-value messages.

Every leaf primitive of a document becomes one message: the full path from the
root plus the leaf value, rendered into an unambiguous byte string. Message
order follows a total order on paths, so any sub-document's messages are a
contiguous-free subset of the original's. This is the foundation the
multi-message signature layer signs over.

Wire format (bit-exact): ``<path>=<value>`` in UTF-8, where key segments are
rendered ``"key"`` with ``"`` and ``\\`` backslash-escaped, index segments are
rendered ``[n]``, and the value is a canonical JSON literal. Empty containers
contribute a synthetic leaf with the reserved bare tag ``{}`` or ``[]``
(except at the root, which simply yields no messages).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Union

DEFAULT_MAX_DEPTH = 64


class CanonicalizationError(Exception):
    """Base class for canonicalization failures."""


class DuplicateKey(CanonicalizationError):
    """An object in the source text contains the same key twice."""


class NonFiniteNumber(CanonicalizationError):
    """NaN or infinity cannot be represented in a canonical message."""


class DepthExceeded(CanonicalizationError):
    """Document nesting exceeds the configured maximum."""


class InvalidDocument(CanonicalizationError):
    """Document contains values outside the JSON data model."""


class MalformedMessage(CanonicalizationError):
    """Byte string is not a valid message encoding."""


class _EmptyContainer:
    """Reserved value tag for empty objects/arrays (singletons)."""

    __slots__ = ("tag",)

    def __init__(self, tag: str):
        self.tag = tag

    def __repr__(self) -> str:
        return f"<empty {self.tag}>"


EMPTY_OBJECT = _EmptyContainer("{}")
EMPTY_ARRAY = _EmptyContainer("[]")

Segment = Union[str, int]


@dataclass(frozen=True)
class JsonPath:
    """Path from the document root to one node: object keys and array indices."""

    segments: tuple

    def __post_init__(self):
        for seg in self.segments:
            if isinstance(seg, bool) or not isinstance(seg, (str, int)):
                raise InvalidDocument(f"bad path segment {seg!r}")
            if isinstance(seg, str) and seg == "":
                raise InvalidDocument("empty string key segment")
            if isinstance(seg, int) and seg < 0:
                raise InvalidDocument("negative array index segment")

    def sort_key(self) -> tuple:
        # Keys order by UTF-8 bytes, indices numerically; a node is either an
        # object or an array so the (0, 1) discriminant never decides within
        # one well-formed document.
        return tuple(
            (0, seg.encode("utf-8")) if isinstance(seg, str) else (1, seg)
            for seg in self.segments
        )

    def render(self) -> str:
        out = []
        for seg in self.segments:
            if isinstance(seg, str):
                escaped = seg.replace("\\", "\\\\").replace('"', '\\"')
                out.append(f'"{escaped}"')
            else:
                out.append(f"[{seg}]")
        return "".join(out)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)


@dataclass(frozen=True)
class CanonicalMessage:
    """One signed atomic statement: a path, its leaf value, and the encoding bytes."""

    path: JsonPath
    value: Any
    encoding: bytes = field(compare=False)


@dataclass(frozen=True)
class CanonicalForm:
    """All messages of a document, sorted by the total path order."""

    messages: tuple

    @property
    def count(self) -> int:
        return len(self.messages)

    def encodings(self) -> list:
        return [m.encoding for m in self.messages]


def format_number(value) -> str:
    """Shortest round-trip decimal rendering; ``-0`` normalizes to ``0``."""
    if isinstance(value, int):
        return str(value)
    if math.isnan(value) or math.isinf(value):
        raise NonFiniteNumber(f"cannot canonicalize {value!r}")
    if value == 0.0:
        return "0"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    # repr() is shortest-round-trip; normalize exponent spelling ('1e+16' ->
    # '1e16', '1e-05' -> '1e-5') so equal doubles share one rendering.
    text = repr(value)
    return text.replace("e+", "e").replace("e-0", "e-")


def canonical_literal(value) -> str:
    """Render a leaf value as its canonical JSON literal."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return format_number(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, _EmptyContainer):
        return value.tag
    raise InvalidDocument(f"not a JSON primitive: {type(value).__name__}")


def encode_message(path: JsonPath, value) -> bytes:
    """Encode one (path, value) pair into its unambiguous byte string."""
    if isinstance(path, tuple):
        path = JsonPath(path)
    if len(path) == 0:
        raise InvalidDocument("message path must be non-empty")
    return (path.render() + "=" + canonical_literal(value)).encode("utf-8")


def decode_message(data: bytes) -> tuple:
    """Exact inverse of :func:`encode_message`; raises MalformedMessage otherwise."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedMessage("not valid UTF-8") from exc
    segments: list = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == '"':
            i += 1
            buf = []
            while True:
                if i >= n:
                    raise MalformedMessage("unterminated key segment")
                c = text[i]
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in ('"', "\\"):
                        raise MalformedMessage("bad escape in key segment")
                    buf.append(text[i + 1])
                    i += 2
                elif c == '"':
                    i += 1
                    break
                else:
                    buf.append(c)
                    i += 1
            key = "".join(buf)
            if key == "":
                raise MalformedMessage("empty key segment")
            segments.append(key)
        elif ch == "[":
            j = text.find("]", i)
            if j < 0:
                raise MalformedMessage("unterminated index segment")
            digits = text[i + 1 : j]
            if not digits.isdigit() or (len(digits) > 1 and digits[0] == "0"):
                raise MalformedMessage(f"bad index segment {digits!r}")
            segments.append(int(digits))
            i = j + 1
        elif ch == "=":
            i += 1
            break
        else:
            raise MalformedMessage(f"unexpected character {ch!r} in path")
    else:
        raise MalformedMessage("missing '=' separator")
    if not segments:
        raise MalformedMessage("empty path")
    literal = text[i:]
    value = _parse_literal(literal)
    return JsonPath(tuple(segments)), value


def _parse_literal(literal: str):
    if literal == "{}":
        return EMPTY_OBJECT
    if literal == "[]":
        return EMPTY_ARRAY
    try:
        value = json.loads(literal)
    except ValueError as exc:
        raise MalformedMessage(f"bad value literal {literal!r}") from exc
    if isinstance(value, (dict, list)):
        raise MalformedMessage("value literal must be a primitive")
    return value


def iter_leaves(doc, max_depth: int = DEFAULT_MAX_DEPTH) -> Iterator[tuple]:
    """Yield (segments tuple, leaf value) for every leaf of a parsed document.

    Empty containers below the root yield their reserved tag; an empty root
    yields nothing.
    """
    yield from _walk(doc, (), max_depth)


def _walk(node, prefix: tuple, remaining: int) -> Iterator[tuple]:
    if remaining < 0:
        raise DepthExceeded("document nesting too deep")
    if isinstance(node, dict):
        if not node:
            if prefix:
                yield prefix, EMPTY_OBJECT
            return
        for key, child in node.items():
            if isinstance(key, bool) or not isinstance(key, str):
                raise InvalidDocument(f"object key must be a string, got {key!r}")
            if key == "":
                raise InvalidDocument("object key must be non-empty")
            yield from _walk(child, prefix + (key,), remaining - 1)
    elif isinstance(node, list):
        if not node:
            if prefix:
                yield prefix, EMPTY_ARRAY
            return
        for idx, child in enumerate(node):
            yield from _walk(child, prefix + (idx,), remaining - 1)
    elif node is None or isinstance(node, (bool, str)):
        yield prefix, node
    elif isinstance(node, (int, float)):
        if isinstance(node, float) and not math.isfinite(node):
            raise NonFiniteNumber(f"non-finite number at {prefix!r}")
        yield prefix, node
    else:
        raise InvalidDocument(f"unsupported value type {type(node).__name__}")


def parse_document(text):
    """Parse JSON text, rejecting duplicate object keys."""

    def check_pairs(pairs):
        obj = {}
        for key, value in pairs:
            if key in obj:
                raise DuplicateKey(f"duplicate object key {key!r}")
            obj[key] = value
        return obj

    try:
        return json.loads(text, object_pairs_hook=check_pairs)
    except DuplicateKey:
        raise
    except ValueError as exc:
        raise InvalidDocument(f"not valid JSON: {exc}") from exc


def canonicalize(doc, max_depth: int = DEFAULT_MAX_DEPTH) -> CanonicalForm:
    """Serialize a document into its ordered array of canonical messages.

    Accepts parsed JSON (dict or list root) or raw JSON text/bytes, in which
    case duplicate object keys are rejected.
    """
    if isinstance(doc, (str, bytes)):
        doc = parse_document(doc)
    if not isinstance(doc, (dict, list)):
        raise InvalidDocument("document root must be an object or array")
    pairs = list(iter_leaves(doc, max_depth))
    return canonicalize_sparse(pairs)


def canonicalize_sparse(pairs) -> CanonicalForm:
    """Canonicalize an explicit set of (path, value) pairs (a sparse document).

    The messages of any subset of a document's leaves, canonicalized this way,
    are exactly that subset of the full document's messages.
    """
    normalized = []
    for path, value in pairs:
        if not isinstance(path, JsonPath):
            path = JsonPath(tuple(path))
        normalized.append((path, value))
    normalized.sort(key=lambda pv: pv[0].sort_key())
    messages = []
    seen = set()
    for path, value in normalized:
        enc = encode_message(path, value)
        if enc in seen:
            raise InvalidDocument(f"duplicate message {enc!r}")
        seen.add(enc)
        messages.append(CanonicalMessage(path=path, value=value, encoding=enc))
    return CanonicalForm(messages=tuple(messages))
