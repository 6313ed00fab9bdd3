"""Unified command line: scaffold portals, run servers, query, check status.

Exit codes: 0 success, 1 operational failure, 2 unparseable filter,
3 target unreachable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

from .agent import GiisServer, GrisAgent, ResourceProfile, load_profile, save_profile
from .config import (
    CONFIG_FILENAME,
    DEFAULT_DIRECTORY_PORT,
    DirNotEmpty,
    UnreadableAsset,
    load_config,
    scaffold,
)
from .protocol import (
    Dn,
    FilterSyntaxError,
    Scope,
    SearchRequest,
    Timeout,
    Unreachable,
    client_search,
    next_msg_id,
    parse_filter,
)

DEFAULT_INDEX_PORT = 2170


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshscape",
        description="Testbed portals over simulated grid directory services.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a blank portal directory")
    p.add_argument("dir", type=Path)
    p.add_argument("--name", required=True, help="testbed display name")
    p.add_argument("--map", type=Path, help="map image to copy in (default: generated)")
    p.add_argument("--logo", type=Path, help="logo image to copy in (default: generated)")
    p.set_defaults(handler=cmd_init)

    p = sub.add_parser("serve", help="serve a portal directory over HTTP")
    p.add_argument("dir", type=Path)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--admin-token", help="enable admin endpoints (or set MESHSCAPE_ADMIN_TOKEN)")
    p.add_argument("--ui-dir", type=Path, help="directory with a built web UI to serve at /")
    p.add_argument("--cors", action="append", default=[], metavar="ORIGIN")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("agent", help="run one resource's directory server")
    p.add_argument("--profile", type=Path, help="resource profile file")
    p.add_argument("--hostname", help="hostname for a generated profile")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--country", default="")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_DIRECTORY_PORT)
    p.add_argument("--tick-ms", type=int, default=1000, help="dynamics step interval; 0 freezes")
    p.add_argument("--delay-ms", type=int, default=0, help="artificial reply delay")
    p.add_argument("--register", metavar="HOST:PORT", help="index server to register with")
    p.add_argument("--ttl", type=int, default=60, help="registration lifetime in seconds")
    p.add_argument("--write-profile", type=Path, help="write the effective profile and exit")
    p.set_defaults(handler=cmd_agent)

    p = sub.add_parser("giis", help="run an index server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_INDEX_PORT)
    p.add_argument("--expire-interval-ms", type=int, default=1000)
    p.set_defaults(handler=cmd_giis)

    p = sub.add_parser("query", help="evaluate a filter against an endpoint or portal")
    p.add_argument("filter")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--endpoint", metavar="HOST:PORT", help="a directory server to search")
    target.add_argument("--portal", type=Path, help="portal dir: one-shot poll, then query the cache")
    p.add_argument("--attrs", default="", help="comma-separated projection")
    p.add_argument("--base", help="search base DN (endpoint mode)")
    p.add_argument("--scope", choices=["base", "one", "sub"], default="sub")
    p.add_argument("--timeout", type=float, default=5.0)
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser("status", help="show per-resource status")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--portal", type=Path, help="portal dir: poll every resource once")
    target.add_argument("--url", help="base URL of a running portal, e.g. http://127.0.0.1:8000")
    p.set_defaults(handler=cmd_status)

    return parser


# -- helpers -----------------------------------------------------------------


def fail(message: str, code: int = 1) -> int:
    print(f"meshscape: {message}", file=sys.stderr)
    return code


def parse_filter_or_exit(text: str):
    try:
        return parse_filter(text)
    except FilterSyntaxError as exc:
        column = len(text.encode("utf-8")[: exc.offset].decode("utf-8", "ignore"))
        print(text, file=sys.stderr)
        print(" " * column + "^", file=sys.stderr)
        print(f"meshscape: {exc}", file=sys.stderr)
        raise SystemExit(2)


def split_endpoint(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise SystemExit(fail(f"expected HOST:PORT, got {value!r}"))
    return host, int(port)


def print_table(headers: list[str], rows: list[list[str]]):
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


def wait_forever():
    while True:
        time.sleep(3600)


# -- commands ----------------------------------------------------------------


def cmd_init(args) -> int:
    try:
        created = scaffold(args.dir, args.name, map_image=args.map, logo_image=args.logo)
    except DirNotEmpty:
        return fail(f"{args.dir} is not empty")
    except UnreadableAsset as exc:
        return fail(f"unreadable asset: {exc}")
    for path in created:
        print(path)
    print(f"portal ready: meshscape serve {args.dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    token = args.admin_token or os.environ.get("MESHSCAPE_ADMIN_TOKEN") or None
    service = ServiceConfig(
        portal_dir=args.dir,
        listen_host=args.host,
        listen_port=args.port,
        admin_token=token,
        cors_origins=args.cors,
        ui_dir=args.ui_dir,
    )
    try:
        app = create_app(service)
    except Exception as exc:
        return fail(f"cannot serve {args.dir}: {exc}")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit:
        return fail(f"server on {args.host}:{args.port} exited abnormally")
    except OSError as exc:
        return fail(f"cannot listen on {args.host}:{args.port}: {exc}")
    return 0


def build_profile(args) -> ResourceProfile:
    if args.profile:
        return load_profile(args.profile)
    import socket

    hostname = args.hostname or socket.gethostname()
    return ResourceProfile(hostname=hostname, seed=args.seed, country=args.country)


def cmd_agent(args) -> int:
    try:
        profile = build_profile(args)
        profile.validate()
    except (OSError, ValueError) as exc:
        return fail(f"bad profile: {exc}")
    if args.write_profile:
        save_profile(profile, args.write_profile)
        print(args.write_profile)
        return 0
    register_to = split_endpoint(args.register) if args.register else None
    try:
        agent = GrisAgent(
            profile,
            host=args.host,
            port=args.port,
            tick_ms=args.tick_ms,
            delay_ms=args.delay_ms,
            register_to=register_to,
            ttl_seconds=args.ttl,
        ).start()
    except OSError as exc:
        return fail(f"cannot listen on {args.host}:{args.port}: {exc}")
    print(f"agent {profile.hostname} listening on {agent.host}:{agent.port}")
    try:
        wait_forever()
    finally:
        agent.stop()
    return 0


def cmd_giis(args) -> int:
    try:
        server = GiisServer(host=args.host, port=args.port, expire_interval_ms=args.expire_interval_ms).start()
    except OSError as exc:
        return fail(f"cannot listen on {args.host}:{args.port}: {exc}")
    print(f"index server listening on {server.host}:{server.port}")
    try:
        wait_forever()
    finally:
        server.stop()
    return 0


def cmd_query(args) -> int:
    parsed = parse_filter_or_exit(args.filter)
    attrs = tuple(a.strip() for a in args.attrs.split(",") if a.strip())
    if args.endpoint:
        host, port = split_endpoint(args.endpoint)
        req = SearchRequest(
            msg_id=next_msg_id(),
            filter=parsed,
            base=Dn.parse(args.base) if args.base else None,
            scope=Scope(args.scope),
            attrs=attrs,
        )
        try:
            entries = client_search(host, port, req, timeout=args.timeout)
        except (Unreachable, Timeout) as exc:
            return fail(str(exc), 3)
        rows = []
        for entry in entries:
            flat = "; ".join(f"{k}={'|'.join(v)}" for k, v in sorted(entry.attributes.items()))
            rows.append([entry.dn.text(), flat])
        print_table(["dn", "attributes"], rows)
        return 0

    from .core import init_manager
    from .query import query

    try:
        cfg = load_config(Path(args.portal) / CONFIG_FILENAME)
        manager = init_manager(cfg)
    except (OSError, ValueError) as exc:
        return fail(f"cannot load portal: {exc}")
    try:
        manager.refresh_now()
        result = query(manager.get_snapshot(), parsed, attrs)
    finally:
        manager.stop()
    rows = [
        [r.name, r.status.value, "yes" if r.matched else "no"]
        + ["; ".join(f"{k}={'|'.join(v)}" for k, v in sorted(r.projected.items()))]
        for r in result
    ]
    print_table(["name", "status", "matched", "projected"], rows)
    return 0


def cmd_status(args) -> int:
    if args.url:
        url = args.url.rstrip("/") + "/api/resources"
        try:
            with urllib.request.urlopen(url, timeout=10) as response:
                doc = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError) as exc:
            return fail(f"cannot reach {url}: {exc}", 3)
        rows = [
            [r["id"], r["name"], r["status"], r.get("last_error") or ""]
            for r in doc["resources"]
        ]
        print_table(["id", "name", "status", "last_error"], rows)
        return 0

    from .core import init_manager

    try:
        cfg = load_config(Path(args.portal) / CONFIG_FILENAME)
        manager = init_manager(cfg)
    except (OSError, ValueError) as exc:
        return fail(f"cannot load portal: {exc}")
    try:
        manager.refresh_now()
        snap = manager.get_snapshot()
    finally:
        manager.stop()
    rows = [[l.id, l.name, l.status.value, l.last_error or ""] for l in snap.locations]
    print_table(["id", "name", "status", "last_error"], rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
