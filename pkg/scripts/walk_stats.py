#!/usr/bin/env python3
"""Summarize the simulated dynamics over many seeds and ticks.

Useful for eyeballing that the bounded random walks behave sensibly: load
stays inside [0, 4*cpus], filesystem free space inside [0, total], and both
actually move.  Prints one row per seed plus an aggregate line.

    python3 scripts/walk_stats.py --seeds 20 --ticks 5000
"""

import argparse
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from meshscape.agent import ResourceProfile, collect


def series(profile: ResourceProfile, ticks: int):
    loads, frees = [], []
    for tick in range(ticks + 1):
        by_dn = {e.dn.text(): e for e in collect(profile, tick)}
        load = float(by_dn[f"category=load, hn={profile.hostname}, o=grid"].attributes["load-one"][0])
        free = float(by_dn[f"category=filesystem, hn={profile.hostname}, o=grid"].attributes["fs-free-gb"][0])
        loads.append(load)
        frees.append(free)
    return loads, frees


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--ticks", type=int, default=2000)
    args = parser.parse_args()

    header = f"{'seed':>4}  {'cpus':>4}  {'load mean':>9}  {'load max':>8}  {'free mean':>9}  {'free drift':>10}"
    print(header)
    print("-" * len(header))
    all_loads = []
    for seed in range(1, args.seeds + 1):
        profile = ResourceProfile(hostname=f"walk-{seed:02d}", seed=seed)
        loads, frees = series(profile, args.ticks)
        cap = 4 * profile.cpu_count
        assert all(0.0 <= v <= cap for v in loads), f"load escaped bounds for seed {seed}"
        assert all(0.0 <= v <= profile.fs_total_gb for v in frees), f"fs escaped bounds for seed {seed}"
        all_loads.extend(loads)
        print(
            f"{seed:>4}  {profile.cpu_count:>4}  {statistics.fmean(loads):>9.3f}  "
            f"{max(loads):>8.2f}  {statistics.fmean(frees):>9.2f}  "
            f"{frees[-1] - frees[0]:>+10.2f}"
        )
    print(
        f"\n{args.seeds} seeds x {args.ticks} ticks: global load mean "
        f"{statistics.fmean(all_loads):.3f}, stdev {statistics.pstdev(all_loads):.3f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
