"""Directory data model: distinguished names, entries and search scopes."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

ATTR_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9-]*\Z")

# Characters that must be backslash-escaped inside a DN value.
_DN_SPECIALS = "\\,="


def valid_attr_name(name: str) -> bool:
    return bool(ATTR_NAME_RE.match(name))


def _escape_dn_value(value: str) -> str:
    out = []
    for ch in value:
        if ch in _DN_SPECIALS:
            out.append("\\")
        out.append(ch)
    return "".join(out)


@dataclass(frozen=True)
class Dn:
    """Hierarchical entry key: (attribute, value) RDNs, most specific first.

    Attribute names are case-insensitive and stored lowercased.  The canonical
    text form joins RDNs with ", " (comma, one space); values escape the
    characters ``\\ , =`` with a backslash.
    """

    rdns: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.rdns:
            raise ValueError("a DN needs at least one RDN")
        norm = []
        for name, value in self.rdns:
            if not valid_attr_name(name):
                raise ValueError(f"bad RDN attribute name: {name!r}")
            norm.append((name.lower(), value))
        object.__setattr__(self, "rdns", tuple(norm))

    @classmethod
    def of(cls, *rdns: tuple[str, str]) -> "Dn":
        return cls(tuple(rdns))

    @classmethod
    def parse(cls, text: str) -> "Dn":
        """Parse the canonical text form.  Raises ValueError on malformed input."""
        rdns: list[tuple[str, str]] = []
        part: list[str] = []
        parts: list[str] = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch == "\\":
                if i + 1 >= len(text):
                    raise ValueError("dangling escape in DN")
                part.append("\\" + text[i + 1])
                i += 2
                continue
            if ch == ",":
                parts.append("".join(part))
                part = []
                i += 1
                continue
            part.append(ch)
            i += 1
        parts.append("".join(part))
        for raw in parts:
            # only the separator's space is cosmetic; value whitespace is data
            raw = raw.lstrip()
            name, eq, value = _split_unescaped(raw)
            if not eq:
                raise ValueError(f"RDN without '=': {raw!r}")
            rdns.append((name, _unescape_dn_value(value)))
        return cls(tuple(rdns))

    def text(self) -> str:
        return ", ".join(f"{name}={_escape_dn_value(value)}" for name, value in self.rdns)

    def parent(self) -> "Dn | None":
        if len(self.rdns) <= 1:
            return None
        return Dn(self.rdns[1:])

    def is_under(self, base: "Dn") -> bool:
        """True when this DN equals `base` or sits anywhere below it."""
        n = len(base.rdns)
        return len(self.rdns) >= n and self.rdns[len(self.rdns) - n:] == base.rdns

    def is_child_of(self, base: "Dn") -> bool:
        return len(self.rdns) == len(base.rdns) + 1 and self.rdns[1:] == base.rdns

    def __str__(self) -> str:
        return self.text()


def _split_unescaped(raw: str) -> tuple[str, str, str]:
    """Split an RDN on its first unescaped '='; escapes are still intact here."""
    i = 0
    while i < len(raw):
        if raw[i] == "\\":
            i += 2
            continue
        if raw[i] == "=":
            return raw[:i], "=", raw[i + 1:]
        i += 1
    return raw, "", ""


def _unescape_dn_value(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        if value[i] == "\\" and i + 1 < len(value):
            out.append(value[i + 1])
            i += 2
        else:
            out.append(value[i])
            i += 1
    return "".join(out)


@dataclass
class Entry:
    """A DN plus a multi-valued attribute map.

    Attribute names are stored lowercased; value lists keep their order.
    Published entries always carry `objectclass` (enforced by the producers,
    not by this type: synthetic query-side entries may omit it).
    """

    dn: Dn
    attributes: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        norm: dict[str, list[str]] = {}
        for name, values in self.attributes.items():
            if not valid_attr_name(name):
                raise ValueError(f"bad attribute name: {name!r}")
            norm.setdefault(name.lower(), []).extend(str(v) for v in values)
        self.attributes = norm

    def get(self, name: str) -> list[str]:
        return self.attributes.get(name.lower(), [])

    def has(self, name: str) -> bool:
        return bool(self.attributes.get(name.lower()))

    def to_doc(self) -> dict:
        return {"dn": self.dn.text(), "attributes": {k: list(v) for k, v in self.attributes.items()}}

    @classmethod
    def from_doc(cls, doc: dict) -> "Entry":
        return cls(Dn.parse(doc["dn"]), {k: list(v) for k, v in doc["attributes"].items()})


class Scope(Enum):
    """Search scope: the base entry, its direct children, or the whole subtree."""

    BASE = "base"
    ONE = "one"
    SUB = "sub"
