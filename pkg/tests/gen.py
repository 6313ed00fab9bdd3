"""Seeded random generators for protocol round-trip tests.

Kept independent of hypothesis so the acceptance suite can run exact,
reproducible case counts.
"""

from __future__ import annotations

import random
import string

from meshscape.protocol import (
    And,
    Dn,
    Entry,
    Equality,
    ErrorMessage,
    GreaterOrEqual,
    LessOrEqual,
    Not,
    Or,
    Ping,
    Pong,
    Presence,
    Register,
    RegisterAck,
    Scope,
    SearchDone,
    SearchEntry,
    SearchRequest,
    Substring,
)

ATTRS = ["objectclass", "os-name", "cpu-count", "load-one", "a", "b-2", "fs-free-gb"]

_VALUE_POOL = [
    "", "Linux", "x*y", "with (parens)", "back\\slash", "unicodé ✓",
    "4", "-3.5", "0.5", "a,b=c", "  spaced  ",
]


def random_value(rng: random.Random) -> str:
    if rng.random() < 0.5:
        return rng.choice(_VALUE_POOL)
    n = rng.randint(1, 10)
    alphabet = string.ascii_letters + string.digits + "()*\\ .,-_é"
    return "".join(rng.choice(alphabet) for _ in range(n))


def random_leaf(rng: random.Random):
    attr = rng.choice(ATTRS)
    kind = rng.randrange(5)
    if kind == 0:
        return Presence(attr)
    if kind == 1:
        return Equality(attr, random_value(rng))
    if kind == 2:
        return GreaterOrEqual(attr, random_value(rng))
    if kind == 3:
        return LessOrEqual(attr, random_value(rng))
    while True:
        initial = random_value(rng) if rng.random() < 0.6 else None
        final = random_value(rng) if rng.random() < 0.6 else None
        middle = tuple(v for v in (random_value(rng) for _ in range(rng.randrange(3))) if v)
        if initial or final or middle:
            return Substring(attr, initial, middle, final)


def random_filter(rng: random.Random, depth: int = 3):
    if depth <= 0 or rng.random() < 0.4:
        return random_leaf(rng)
    kind = rng.randrange(3)
    if kind == 0:
        return Not(random_filter(rng, depth - 1))
    children = tuple(random_filter(rng, depth - 1) for _ in range(rng.randint(1, 3)))
    return And(children) if kind == 1 else Or(children)


def random_dn(rng: random.Random) -> Dn:
    rdns = []
    for _ in range(rng.randint(1, 3)):
        name = rng.choice(["hn", "category", "o", "ou"])
        rdns.append((name, random_value(rng) or "v"))
    return Dn(tuple(rdns))


def random_entry(rng: random.Random) -> Entry:
    attributes = {"objectclass": ["Thing"]}
    for _ in range(rng.randrange(4)):
        attributes[rng.choice(ATTRS)] = [random_value(rng) for _ in range(rng.randint(1, 3))]
    return Entry(random_dn(rng), attributes)


def random_message(rng: random.Random):
    kind = rng.randrange(8)
    if kind == 0:
        return SearchRequest(
            msg_id=rng.randint(1, 10_000),
            filter=random_filter(rng),
            base=random_dn(rng) if rng.random() < 0.7 else None,
            scope=rng.choice(list(Scope)),
            attrs=tuple(rng.sample(ATTRS, rng.randrange(3))),
        )
    if kind == 1:
        return SearchEntry(rng.randint(1, 10_000), random_entry(rng))
    if kind == 2:
        return SearchDone(rng.randint(1, 10_000), rng.choice([0, 2, 32]), random_value(rng))
    if kind == 3:
        return Register(random_dn(rng), "127.0.0.1", rng.randint(1, 65535), rng.randint(1, 3600))
    if kind == 4:
        return RegisterAck(rng.random() < 0.5)
    if kind == 5:
        return Ping(rng.randrange(2**31))
    if kind == 6:
        return Pong(rng.randrange(2**31))
    return ErrorMessage(random_value(rng))


def random_pin(rng: random.Random, id: str):
    from meshscape.config import ResourcePin

    return ResourcePin(
        id=id,
        name=rng.choice(["Node", "Cluster", "Sim Résource", "East lab"]) + f" {rng.randint(1, 99)}",
        address=rng.choice(["localhost", "127.0.0.1", "grid.example.org"]),
        port=rng.randint(1, 65535),
        x=round(rng.random(), 4),
        y=round(rng.random(), 4),
        country=rng.choice(["", "AU", "DE", "NZ", "KR"]),
    )


def random_config(rng: random.Random):
    from meshscape.config import RefreshOverrides, TestbedConfig

    refresh = RefreshOverrides(
        period_seconds=rng.choice([None, 10.0, 30.0, 2.5]),
        per_resource_timeout_seconds=rng.choice([None, 0.3, 1.0]),
        staleness_factor=rng.choice([None, 1.0, 3.0, 5.5]),
        max_parallel_polls=rng.choice([None, 1, 8, 16]),
    )
    pins = [random_pin(rng, f"r-{i:03d}") for i in range(rng.randrange(6))]
    return TestbedConfig(
        name=rng.choice(["Test Grid", "Wide-Área Testbed", "bed-1"]),
        logo_path=rng.choice(["assets/logo.png", "assets/brand.png"]),
        map_path=rng.choice(["assets/map.png", "assets/world.png"]),
        refresh=refresh,
        resources=pins,
    )
