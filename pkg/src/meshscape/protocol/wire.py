"""Wire protocol: the message set and length-prefixed framing.

A frame is a 4-byte big-endian unsigned body length followed by the body:
the canonical compact structured-text form of the message, tagged by its
`op` field.  Bodies are capped at 1 MiB.  Because the body notation is
canonical (sorted keys, no whitespace), encoding the same message always
yields the same bytes.

    op ∈ {search, entry, done, register, register_ack, ping, pong, error}
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Union

from .. import canonical
from .errors import OversizeMessage, ProtocolViolation
from .filters import Filter, parse_filter, render_filter
from .types import Dn, Entry, Scope, valid_attr_name

MAX_BODY = 1_048_576  # 1 MiB

_LEN = struct.Struct("!I")


@dataclass(frozen=True)
class SearchRequest:
    msg_id: int
    filter: Filter
    base: Dn | None = None  # None = tree root
    scope: Scope = Scope.SUB
    attrs: tuple[str, ...] = ()  # projection; empty = all attributes

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(a.lower() for a in self.attrs))


@dataclass(frozen=True)
class SearchEntry:
    msg_id: int
    entry: Entry


@dataclass(frozen=True)
class SearchDone:
    msg_id: int
    code: int = 0
    diagnostic: str = ""


@dataclass(frozen=True)
class Register:
    dn: Dn
    address: str
    port: int
    ttl_seconds: int


@dataclass(frozen=True)
class RegisterAck:
    accepted: bool


@dataclass(frozen=True)
class Ping:
    nonce: int


@dataclass(frozen=True)
class Pong:
    nonce: int


@dataclass(frozen=True)
class ErrorMessage:
    message: str


Message = Union[SearchRequest, SearchEntry, SearchDone, Register, RegisterAck, Ping, Pong, ErrorMessage]

# Result codes carried by SearchDone.
CODE_OK = 0
CODE_PROTOCOL = 2
CODE_NO_SUCH_BASE = 32


def message_to_body(m: Message) -> dict:
    if isinstance(m, SearchRequest):
        return {
            "op": "search",
            "msg_id": m.msg_id,
            "base": m.base.text() if m.base else "",
            "scope": m.scope.value,
            "filter": render_filter(m.filter),
            "attrs": list(m.attrs),
        }
    if isinstance(m, SearchEntry):
        return {"op": "entry", "msg_id": m.msg_id, "entry": m.entry.to_doc()}
    if isinstance(m, SearchDone):
        return {"op": "done", "msg_id": m.msg_id, "code": m.code, "diagnostic": m.diagnostic}
    if isinstance(m, Register):
        return {
            "op": "register",
            "dn": m.dn.text(),
            "address": m.address,
            "port": m.port,
            "ttl_seconds": m.ttl_seconds,
        }
    if isinstance(m, RegisterAck):
        return {"op": "register_ack", "accepted": m.accepted}
    if isinstance(m, Ping):
        return {"op": "ping", "nonce": m.nonce}
    if isinstance(m, Pong):
        return {"op": "pong", "nonce": m.nonce}
    if isinstance(m, ErrorMessage):
        return {"op": "error", "message": m.message}
    raise TypeError(f"not a message: {m!r}")


class _Body:
    """Field accessor that turns any shape mismatch into ProtocolViolation."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise ProtocolViolation("body is not an object")
        self.doc = doc
        self.seen = set()

    def take(self, name: str, kind: type):
        self.seen.add(name)
        if name not in self.doc:
            raise ProtocolViolation(f"missing field {name!r}")
        value = self.doc[name]
        if kind is int and isinstance(value, bool):
            raise ProtocolViolation(f"field {name!r}: expected {kind.__name__}")
        if not isinstance(value, kind):
            raise ProtocolViolation(f"field {name!r}: expected {kind.__name__}")
        return value

    def done(self):
        extra = set(self.doc) - self.seen - {"op"}
        if extra:
            raise ProtocolViolation(f"unknown fields: {sorted(extra)}")


def message_from_body(doc: dict) -> Message:
    body = _Body(doc)
    op = body.doc.get("op")
    try:
        if op == "search":
            msg_id = body.take("msg_id", int)
            if msg_id <= 0:
                raise ProtocolViolation("msg_id must be positive")
            base_text = body.take("base", str)
            base = Dn.parse(base_text) if base_text else None
            scope = Scope(body.take("scope", str))
            flt = parse_filter(body.take("filter", str))
            attrs = body.take("attrs", list)
            if not all(isinstance(a, str) and valid_attr_name(a) for a in attrs):
                raise ProtocolViolation("attrs must be attribute names")
            body.done()
            return SearchRequest(msg_id, flt, base, scope, tuple(attrs))
        if op == "entry":
            msg_id = body.take("msg_id", int)
            entry_doc = body.take("entry", dict)
            dn = Dn.parse(entry_doc.get("dn", ""))
            attributes = entry_doc.get("attributes")
            if set(entry_doc) != {"dn", "attributes"} or not isinstance(attributes, dict):
                raise ProtocolViolation("malformed entry")
            for k, v in attributes.items():
                if not (isinstance(v, list) and all(isinstance(x, str) for x in v)):
                    raise ProtocolViolation(f"attribute {k!r}: values must be strings")
            body.done()
            return SearchEntry(msg_id, Entry(dn, attributes))
        if op == "done":
            m = SearchDone(body.take("msg_id", int), body.take("code", int), body.take("diagnostic", str))
            body.done()
            return m
        if op == "register":
            m = Register(
                Dn.parse(body.take("dn", str)),
                body.take("address", str),
                body.take("port", int),
                body.take("ttl_seconds", int),
            )
            body.done()
            return m
        if op == "register_ack":
            m = RegisterAck(body.take("accepted", bool))
            body.done()
            return m
        if op == "ping":
            m = Ping(body.take("nonce", int))
            body.done()
            return m
        if op == "pong":
            m = Pong(body.take("nonce", int))
            body.done()
            return m
        if op == "error":
            m = ErrorMessage(body.take("message", str))
            body.done()
            return m
    except ProtocolViolation:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ProtocolViolation(str(exc)) from exc
    raise ProtocolViolation(f"unknown op: {op!r}")


def encode_frame(m: Message) -> bytes:
    body = canonical.dumps(message_to_body(m)).encode("utf-8")
    if len(body) > MAX_BODY:
        raise OversizeMessage(f"body is {len(body)} bytes; limit is {MAX_BODY}")
    return _LEN.pack(len(body)) + body


def decode_frames(buffer: bytes | bytearray | memoryview) -> tuple[list[Message], int]:
    """Decode complete frames from the front of `buffer`.

    Returns (messages, bytes consumed).  A trailing partial frame is left
    unconsumed; feed it again once more bytes arrive.  Raises
    ProtocolViolation on a malformed body or an oversize declared length,
    after which the connection must be dropped.
    """
    view = memoryview(bytes(buffer))
    messages: list[Message] = []
    consumed = 0
    while len(view) - consumed >= _LEN.size:
        (length,) = _LEN.unpack_from(view, consumed)
        if length > MAX_BODY:
            raise ProtocolViolation(f"declared body length {length} exceeds {MAX_BODY}")
        if len(view) - consumed - _LEN.size < length:
            break
        start = consumed + _LEN.size
        raw = bytes(view[start:start + length])
        try:
            doc = canonical.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise ProtocolViolation(f"unparseable body: {exc}") from exc
        messages.append(message_from_body(doc))
        consumed = start + length
    return messages, consumed


class FrameDecoder:
    """Incremental wrapper over decode_frames for socket read loops."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        messages, consumed = decode_frames(self._buf)
        del self._buf[:consumed]
        return messages

    @property
    def pending(self) -> int:
        return len(self._buf)
