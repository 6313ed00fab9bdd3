#!/usr/bin/env python3
"""Spin up a complete local federation and serve a portal for it.

Starts an index server and a handful of directory agents on loopback ports,
scaffolds a portal directory whose pins point at those agents, and serves it
over HTTP with admin mode enabled.  Everything is torn down on Ctrl-C.

    python3 scripts/demo_local.py --agents 4 --port 8000
"""

import argparse
import random
import socket
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from meshscape.agent import GiisServer, GrisAgent, ResourceProfile
from meshscape.config import (
    CONFIG_FILENAME,
    RefreshOverrides,
    ResourcePin,
    load_config,
    save_config,
    scaffold,
)
from meshscape.service import ServiceConfig, create_app

COUNTRIES = ["AU", "DE", "JP", "NZ", "US", "GB"]


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--agents", type=int, default=3)
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--admin-token", default="demo")
    parser.add_argument("--dir", type=Path, help="portal directory (default: a temp dir)")
    parser.add_argument("--tick-ms", type=int, default=1000, help="agent dynamics step; 0 freezes")
    args = parser.parse_args()

    rng = random.Random(0)
    portal_dir = args.dir or Path(tempfile.mkdtemp(prefix="meshscape-demo-"))
    if not portal_dir.exists() or not any(portal_dir.iterdir()):
        scaffold(portal_dir, "Local Demo Testbed")

    giis = GiisServer(expire_interval_ms=1000).start()
    print(f"index server on {giis.host}:{giis.port}")

    agents = []
    pins = []
    for i in range(args.agents):
        profile = ResourceProfile(
            hostname=f"demo-{i:02d}", seed=i + 1, country=rng.choice(COUNTRIES)
        )
        agent = GrisAgent(
            profile,
            tick_ms=args.tick_ms,
            register_to=(giis.host, giis.port),
            ttl_seconds=30,
        ).start()
        agents.append(agent)
        pins.append(
            ResourcePin(
                id=f"demo-{i:02d}",
                name=f"Demo Node {i}",
                address=agent.host,
                port=agent.port,
                x=round(rng.uniform(0.1, 0.9), 3),
                y=round(rng.uniform(0.1, 0.9), 3),
                country=profile.country,
            )
        )
        print(f"agent {profile.hostname} on {agent.host}:{agent.port}")

    cfg = load_config(portal_dir / CONFIG_FILENAME)
    cfg.refresh = RefreshOverrides(period_seconds=5.0, per_resource_timeout_seconds=1.0)
    cfg.resources = pins
    save_config(portal_dir / CONFIG_FILENAME, cfg)

    print(f"portal directory: {portal_dir}")
    print(f"serving on http://127.0.0.1:{args.port}  (admin token: {args.admin_token})")
    print("try:")
    print(f"  curl -s http://127.0.0.1:{args.port}/api/resources")
    print(f'  meshscape query "(status=up)" --portal {portal_dir}')

    import threading
    import time

    import uvicorn

    app = create_app(
        ServiceConfig(
            portal_dir=portal_dir, listen_port=args.port, admin_token=args.admin_token
        )
    )
    # served from a worker thread so Ctrl-C lands here, not in the event loop
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=args.port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        while thread.is_alive():
            time.sleep(0.5)
    except KeyboardInterrupt:
        print("\nshutting down")
    finally:
        server.should_exit = True
        thread.join(timeout=10)
        for agent in agents:
            agent.stop()
        giis.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
