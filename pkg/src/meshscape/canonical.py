"""Canonical structured-text notation shared by wire frames, config files and HTTP bodies.

One grammar everywhere: UTF-8 JSON with object keys sorted lexicographically.
The compact form (no whitespace) is used on the wire so frames are byte-comparable;
the pretty form (two-space indent, trailing newline) is used for files a person
may hand-edit.  Both are deterministic: equal values always serialize to equal
bytes.
"""

from __future__ import annotations

import json
from typing import Any


def dumps(obj: Any) -> str:
    """Compact canonical form, used for frame bodies and HTTP payloads."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def dumps_pretty(obj: Any) -> str:
    """Indented canonical form, used for on-disk documents."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def loads(text: str | bytes) -> Any:
    return json.loads(text)
