"""Information-provider simulation: turn a profile plus a tick count into the entry tree.

The tree has a fixed shape: one root entry per resource and one child entry
per category.  Dynamic values (the load averages and free filesystem space)
follow independent clamped random walks; one walk step per tick.

    load'    = clamp(load + u * cpu_count / 4,  0, 4 * cpu_count),  u ~ U(-0.2, 0.2)
    fs_free' = clamp(fs_free + w,               0, fs_total),       w ~ U(-0.5, 0.5) GB

Each walk draws from its own splitmix64 stream derived from the profile seed,
so identical (profile, tick) inputs always produce byte-identical entries.
"""

from __future__ import annotations

from ..protocol import Dn, Entry
from .profile import ResourceProfile
from .rng import SplitMix64

CATEGORIES = ("os", "cpu", "memory", "filesystem", "network", "load")

ROOT_OBJECTCLASS = "GridResource"

# walk stream indices
_LOAD_ONE, _LOAD_FIVE, _LOAD_FIFTEEN, _FS_FREE = range(4)


def _stream(seed: int, index: int) -> SplitMix64:
    base = SplitMix64(seed)
    sub = 0
    for _ in range(index + 1):
        sub = base.next_u64()
    return SplitMix64(sub)


def _walk(initial: float, low: float, high: float, step: float, seed: int, index: int, ticks: int) -> float:
    rng = _stream(seed, index)
    value = float(initial)
    for _ in range(ticks):
        value = min(high, max(low, value + rng.uniform(-step, step)))
    return value


def simulate_dynamics(profile: ResourceProfile, tick: int) -> dict[str, float]:
    """Dynamic attribute values after `tick` walk steps."""
    cap = 4.0 * profile.cpu_count
    load_step = 0.2 * profile.cpu_count / 4.0
    seed = profile.seed
    return {
        "load-one": _walk(profile.load_one, 0.0, cap, load_step, seed, _LOAD_ONE, tick),
        "load-five": _walk(profile.load_five, 0.0, cap, load_step, seed, _LOAD_FIVE, tick),
        "load-fifteen": _walk(profile.load_fifteen, 0.0, cap, load_step, seed, _LOAD_FIFTEEN, tick),
        "fs-free-gb": _walk(profile.fs_free_gb, 0.0, profile.fs_total_gb, 0.5, seed, _FS_FREE, tick),
    }


def root_dn(hostname: str) -> Dn:
    return Dn.of(("hn", hostname), ("o", "grid"))


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def collect(profile: ResourceProfile, tick: int) -> list[Entry]:
    """Build the 7-entry tree for one resource at a given tick.

    Deterministic: equal (profile, tick) pairs yield equal entries.
    """
    if tick < 0:
        raise ValueError("tick must be non-negative")
    dyn = simulate_dynamics(profile, tick)
    root = root_dn(profile.hostname)
    per_category = {
        "os": {"os-name": [profile.os_name], "os-version": [profile.os_version]},
        "cpu": {"cpu-model": [profile.cpu_model], "cpu-count": [str(profile.cpu_count)]},
        "memory": {"memory-total-mb": [str(profile.memory_total_mb)]},
        "filesystem": {
            "fs-total-gb": [_fmt(profile.fs_total_gb)],
            "fs-free-gb": [_fmt(dyn["fs-free-gb"])],
        },
        "network": {"net-interconnect": [profile.net_interconnect]},
        "load": {
            "load-one": [_fmt(dyn["load-one"])],
            "load-five": [_fmt(dyn["load-five"])],
            "load-fifteen": [_fmt(dyn["load-fifteen"])],
        },
    }
    root_attrs = {"objectclass": [ROOT_OBJECTCLASS], "hn": [profile.hostname]}
    if profile.country:
        root_attrs["country"] = [profile.country]
    entries = [Entry(root, root_attrs)]
    for category in CATEGORIES:
        attributes = {
            "objectclass": [f"{category.capitalize()}Info"],
            "category": [category],
            **per_category[category],
        }
        entries.append(Entry(Dn((("category", category),) + root.rdns), attributes))
    return entries
