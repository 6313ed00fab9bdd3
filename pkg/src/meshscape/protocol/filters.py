"""Search-filter grammar: prefix-notation boolean predicates over entry attributes.

    Filter     := "(" FilterComp ")"
    FilterComp := "&" Filter+ | "|" Filter+ | "!" Filter | Item
    Item       := Attr "=*"                       presence
                | Attr ">=" Value | Attr "<=" Value
                | Attr "=" Value                  equality (no unescaped "*")
                | Attr "=" [Value] ("*" [Value])+ substring
    Attr       := [A-Za-z][A-Za-z0-9-]*           case-insensitive
    Value      := UTF-8 text; ( ) * \\ written as \\28 \\29 \\2a \\5c

The same language is used on the wire and in portal queries.  `parse_filter`
and `render_filter` round-trip exactly: attribute names are lowercased at AST
construction, so equal ASTs render to equal text and back.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Union

from .types import Entry, valid_attr_name

__all__ = [
    "And", "Or", "Not", "Equality", "Presence", "GreaterOrEqual", "LessOrEqual",
    "Substring", "Filter", "FilterSyntaxError", "parse_filter", "render_filter",
    "match_entry",
]


class FilterSyntaxError(ValueError):
    """Filter text violates the grammar.  Carries the byte offset of the fault."""

    def __init__(self, offset: int, expected: str):
        super().__init__(f"expected {expected} at byte {offset}")
        self.offset = offset
        self.expected = expected


def _norm_attr(obj, attr: str):
    if not valid_attr_name(attr):
        raise ValueError(f"bad attribute name: {attr!r}")
    object.__setattr__(obj, "attr", attr.lower())


@dataclass(frozen=True)
class Equality:
    attr: str
    value: str

    def __post_init__(self):
        _norm_attr(self, self.attr)


@dataclass(frozen=True)
class Presence:
    attr: str

    def __post_init__(self):
        _norm_attr(self, self.attr)


@dataclass(frozen=True)
class GreaterOrEqual:
    attr: str
    value: str

    def __post_init__(self):
        _norm_attr(self, self.attr)


@dataclass(frozen=True)
class LessOrEqual:
    attr: str
    value: str

    def __post_init__(self):
        _norm_attr(self, self.attr)


@dataclass(frozen=True)
class Substring:
    """Wildcard match: initial*any…*final.  Empty components are dropped."""

    attr: str
    initial: str | None = None
    any: tuple[str, ...] = ()
    final: str | None = None

    def __post_init__(self):
        _norm_attr(self, self.attr)
        object.__setattr__(self, "initial", self.initial or None)
        object.__setattr__(self, "final", self.final or None)
        object.__setattr__(self, "any", tuple(p for p in self.any if p))
        if self.initial is None and self.final is None and not self.any:
            raise ValueError("substring needs at least one non-empty component")


@dataclass(frozen=True)
class And:
    children: tuple["Filter", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("empty conjunction")


@dataclass(frozen=True)
class Or:
    children: tuple["Filter", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("empty disjunction")


@dataclass(frozen=True)
class Not:
    child: "Filter"


Filter = Union[And, Or, Not, Equality, Presence, GreaterOrEqual, LessOrEqual, Substring]


# ---------------------------------------------------------------------------
# Parsing

_HEX = "0123456789abcdefABCDEF"
_ATTR_START = re.compile(r"[A-Za-z]")
_ATTR_CONT = re.compile(r"[A-Za-z0-9-]")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, expected: str, at: int | None = None):
        pos = self.pos if at is None else at
        raise FilterSyntaxError(len(self.text[:pos].encode("utf-8")), expected)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str):
        if self.peek() != ch:
            self.fail(f"'{ch}'")
        self.pos += 1

    def parse(self) -> Filter:
        f = self.filter()
        if self.pos != len(self.text):
            self.fail("end of input")
        return f

    def filter(self) -> Filter:
        self.take("(")
        ch = self.peek()
        if ch == "&":
            self.pos += 1
            node = And(self.filter_list())
        elif ch == "|":
            self.pos += 1
            node = Or(self.filter_list())
        elif ch == "!":
            self.pos += 1
            node = Not(self.filter())
        else:
            node = self.item()
        self.take(")")
        return node

    def filter_list(self) -> tuple[Filter, ...]:
        children = []
        while self.peek() == "(":
            children.append(self.filter())
        if not children:
            self.fail("'(' starting a nested filter")
        return tuple(children)

    def item(self) -> Filter:
        attr = self.attr_name()
        ch = self.peek()
        if ch in (">", "<"):
            self.pos += 1
            self.take("=")
            value = self.plain_value()
            return GreaterOrEqual(attr, value) if ch == ">" else LessOrEqual(attr, value)
        if ch != "=":
            self.fail("'=', '>=' or '<='")
        self.pos += 1
        segments, seg_starts = self.starred_value()
        if len(segments) == 1:
            return Equality(attr, segments[0])
        if len(segments) == 2 and segments[0] == "" and segments[1] == "":
            return Presence(attr)
        if all(s == "" for s in segments):
            self.fail("a non-empty substring component", at=seg_starts[0])
        initial = segments[0] or None
        final = segments[-1] or None
        middle = tuple(s for s in segments[1:-1] if s)
        return Substring(attr, initial, middle, final)

    def attr_name(self) -> str:
        start = self.pos
        if not _ATTR_START.match(self.peek() or "\0"):
            self.fail("attribute name")
        self.pos += 1
        while self.pos < len(self.text) and _ATTR_CONT.match(self.text[self.pos]):
            self.pos += 1
        return self.text[start:self.pos]

    def plain_value(self) -> str:
        segments, _ = self.starred_value()
        if len(segments) != 1:
            self.fail("value without unescaped '*'")
        return segments[0]

    def starred_value(self) -> tuple[list[str], list[int]]:
        """Read value text up to ')', split on unescaped '*'; decodes \\XX escapes."""
        segments: list[str] = []
        starts = [self.pos]
        buf = bytearray()
        while True:
            ch = self.peek()
            if ch == "" or ch == "(":
                self.fail("')'")
            if ch == ")":
                segments.append(self.decode(buf, starts[-1]))
                return segments, starts
            if ch == "*":
                segments.append(self.decode(buf, starts[-1]))
                buf = bytearray()
                self.pos += 1
                starts.append(self.pos)
                continue
            if ch == "\\":
                h = self.text[self.pos + 1:self.pos + 3]
                if len(h) != 2 or h[0] not in _HEX or h[1] not in _HEX:
                    self.fail("two hex digits after '\\'", at=self.pos + 1)
                buf.append(int(h, 16))
                self.pos += 3
                continue
            buf.extend(ch.encode("utf-8"))
            self.pos += 1

    def decode(self, buf: bytearray, at: int) -> str:
        try:
            return buf.decode("utf-8")
        except UnicodeDecodeError:
            self.fail("escapes forming valid UTF-8", at=at)


def parse_filter(text: str) -> Filter:
    """Parse filter text into its AST; the whole input must be consumed."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Rendering

def _escape_value(value: str) -> str:
    out = []
    for ch in value:
        if ch in "()*\\":
            out.append(f"\\{ord(ch):02x}")
        else:
            out.append(ch)
    return "".join(out)


def render_filter(f: Filter) -> str:
    """Canonical text for a filter: lowercased attrs, escaped values, no whitespace."""
    if isinstance(f, And):
        return "(&" + "".join(render_filter(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(|" + "".join(render_filter(c) for c in f.children) + ")"
    if isinstance(f, Not):
        return "(!" + render_filter(f.child) + ")"
    if isinstance(f, Equality):
        return f"({f.attr}={_escape_value(f.value)})"
    if isinstance(f, Presence):
        return f"({f.attr}=*)"
    if isinstance(f, GreaterOrEqual):
        return f"({f.attr}>={_escape_value(f.value)})"
    if isinstance(f, LessOrEqual):
        return f"({f.attr}<={_escape_value(f.value)})"
    if isinstance(f, Substring):
        segments = [f.initial or "", *f.any, f.final or ""]
        return f"({f.attr}=" + "*".join(_escape_value(s) for s in segments) + ")"
    raise TypeError(f"not a filter node: {f!r}")


# ---------------------------------------------------------------------------
# Matching

_NUMERIC = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)\Z")


def _compare(left: str, right: str) -> int:
    """-1/0/1; numeric when both sides are decimal, else case-insensitive text."""
    if _NUMERIC.match(left) and _NUMERIC.match(right):
        a, b = Decimal(left), Decimal(right)
    else:
        a, b = left.casefold(), right.casefold()
    return -1 if a < b else (1 if a > b else 0)


def _substring_match(value: str, f: Substring) -> bool:
    v = value.casefold()
    pos = 0
    if f.initial is not None:
        part = f.initial.casefold()
        if not v.startswith(part):
            return False
        pos = len(part)
    for raw in f.any:
        part = raw.casefold()
        idx = v.find(part, pos)
        if idx < 0:
            return False
        pos = idx + len(part)
    if f.final is not None:
        part = f.final.casefold()
        return len(v) - len(part) >= pos and v.endswith(part)
    return True


def match_entry(entry: Entry, f: Filter) -> bool:
    """Evaluate a filter against one entry.  Total: never raises.

    Any value of a multi-valued attribute may satisfy a predicate.  A missing
    attribute fails Equality, ordering and Substring (so their negations hold).
    """
    if isinstance(f, And):
        return all(match_entry(entry, c) for c in f.children)
    if isinstance(f, Or):
        return any(match_entry(entry, c) for c in f.children)
    if isinstance(f, Not):
        return not match_entry(entry, f.child)
    if isinstance(f, Presence):
        return entry.has(f.attr)
    values = entry.get(f.attr)
    if isinstance(f, Equality):
        want = f.value.casefold()
        return any(v.casefold() == want for v in values)
    if isinstance(f, GreaterOrEqual):
        return any(_compare(v, f.value) >= 0 for v in values)
    if isinstance(f, LessOrEqual):
        return any(_compare(v, f.value) <= 0 for v in values)
    if isinstance(f, Substring):
        return any(_substring_match(v, f) for v in values)
    raise TypeError(f"not a filter node: {f!r}")
