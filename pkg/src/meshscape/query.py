"""Filter queries over the cached snapshot.

Portal queries and wire queries share one filter language; this module only
bridges cached locations into entries that language can see.  Each location
is flattened to a single entry — the union of every cached category entry —
plus synthetic attributes from portal configuration and classification:

    name    always the configured display name
    status  the lowercase status token (unknown/up/down/stale)
    country the configured country when set, else whatever the tree published

Queries always run against the cache, never live resources; callers wanting
freshness trigger an immediate refresh first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import Location, Snapshot, Status
from .protocol import Dn, Entry, Filter, match_entry

__all__ = ["ResourceMatch", "flatten", "query"]


@dataclass(frozen=True)
class ResourceMatch:
    """One result row; rows appear in snapshot order, matched or not."""

    id: str
    name: str
    status: Status
    matched: bool
    projected: dict[str, list[str]] = field(default_factory=dict)


def flatten(loc: Location) -> Entry:
    """Merge a location's cached tree into one queryable entry.

    Attribute values union across entries (first occurrence wins on exact
    duplicates).  The entry is keyed by the cached tree's root when data
    exists, else by a name built from the configured address.
    """
    attributes: dict[str, list[str]] = {}
    for entry in loc.entries:
        for name, values in entry.attributes.items():
            bucket = attributes.setdefault(name, [])
            bucket.extend(v for v in values if v not in bucket)
    attributes["name"] = [loc.name]
    attributes["status"] = [loc.status.value]
    if loc.country:
        attributes["country"] = [loc.country]
    if loc.entries:
        dn = min((e.dn for e in loc.entries), key=lambda d: len(d.rdns))
    else:
        dn = Dn.of(("hn", loc.address), ("o", "grid"))
    return Entry(dn, attributes)


def query(snapshot: Snapshot, f: Filter, projection: tuple[str, ...] = ()) -> list[ResourceMatch]:
    """Evaluate one filter against every location; pure in all arguments."""
    wanted = tuple(attr.lower() for attr in projection)
    rows = []
    for loc in snapshot.locations:
        flat = flatten(loc)
        matched = match_entry(flat, f)
        projected = {}
        if matched and wanted:
            projected = {attr: list(flat.get(attr)) for attr in wanted if flat.has(attr)}
        rows.append(ResourceMatch(loc.id, loc.name, loc.status, matched, projected))
    return rows
