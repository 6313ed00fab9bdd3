"""Index server: TTL-bounded agent registrations and fanned-out searches.

The registry is linearizable (one lock around every mutation and read) and
expiry is checked at read time, so a lapsed registration never serves a
search even between sweeper runs.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..protocol import (
    Dn,
    Entry,
    ErrorMessage,
    Ping,
    Pong,
    Register,
    RegisterAck,
    SearchDone,
    SearchEntry,
    SearchRequest,
    client_search,
)
from .gris import _TcpServer

log = logging.getLogger(__name__)

MAX_FANOUT = 16
# fraction of the total budget granted to each member search
MEMBER_BUDGET = 0.9


@dataclass(frozen=True)
class GiisRegistration:
    dn: Dn
    address: str
    port: int
    ttl_seconds: int
    registered_at: float

    def expires_at(self) -> float:
        return self.registered_at + self.ttl_seconds

    def expired(self, now: float) -> bool:
        return now > self.expires_at()


class GiisRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._members: dict[str, GiisRegistration] = {}

    def register(self, dn: Dn, address: str, port: int, ttl_seconds: int, now: float | None = None) -> bool:
        """Upsert keyed by DN; re-registration refreshes the expiry."""
        if ttl_seconds <= 0 or not address or not 1 <= port <= 65535:
            return False
        reg = GiisRegistration(dn, address, port, ttl_seconds, time.time() if now is None else now)
        with self._lock:
            self._members[dn.text()] = reg
        return True

    def expire(self, now: float | None = None) -> list[Dn]:
        """Drop lapsed registrations; idempotent at a fixed `now`."""
        now = time.time() if now is None else now
        with self._lock:
            gone = [key for key, reg in self._members.items() if reg.expired(now)]
            evicted = [self._members.pop(key).dn for key in gone]
        return evicted

    def live(self, now: float | None = None) -> list[GiisRegistration]:
        now = time.time() if now is None else now
        with self._lock:
            return [reg for reg in self._members.values() if not reg.expired(now)]

    def __len__(self) -> int:
        with self._lock:
            return len(self._members)


def giis_search(
    registry: GiisRegistry,
    req: SearchRequest,
    timeout: float = 5.0,
    search=client_search,
) -> tuple[list[Entry], int]:
    """Fan a search out to every live member; partial results are the contract.

    Returns (entries, unreachable member count).  Unreachable or slow members
    contribute nothing; everything else is concatenated.
    """
    members = registry.live()
    if not members:
        return [], 0
    deadline = time.monotonic() + timeout
    member_timeout = timeout * MEMBER_BUDGET
    entries: list[Entry] = []
    unreachable = 0
    with ThreadPoolExecutor(max_workers=min(MAX_FANOUT, len(members))) as pool:
        futures = {
            pool.submit(search, reg.address, reg.port, req, member_timeout): reg
            for reg in members
        }
        for future, reg in futures.items():
            try:
                entries.extend(future.result(timeout=max(0.0, deadline - time.monotonic()) + 0.05))
            except Exception as exc:
                unreachable += 1
                log.info("member %s (%s:%s) unreachable: %s", reg.dn.text(), reg.address, reg.port, exc)
    return entries, unreachable


class GiisServer(_TcpServer):
    """TCP index server: register/search/ping, with a background expiry sweeper."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        expire_interval_ms: int = 1000,
        search_timeout: float = 5.0,
    ):
        super().__init__(host, port, name="giis")
        self.registry = GiisRegistry()
        self.expire_interval_ms = expire_interval_ms
        self.search_timeout = search_timeout
        self._sweeper: threading.Thread | None = None

    def start(self):
        super().start()
        self._sweeper = threading.Thread(target=self._sweep_loop, daemon=True)
        self._sweeper.start()
        return self

    def _sweep_loop(self):
        while not self._stop.wait(self.expire_interval_ms / 1000.0):
            for dn in self.registry.expire():
                log.info("registration expired: %s", dn.text())

    def handle(self, conn: socket.socket, msg) -> bool:
        if isinstance(msg, Ping):
            return self._send(conn, Pong(msg.nonce))
        if isinstance(msg, Register):
            accepted = self.registry.register(msg.dn, msg.address, msg.port, msg.ttl_seconds)
            return self._send(conn, RegisterAck(accepted))
        if isinstance(msg, SearchRequest):
            entries, unreachable = giis_search(self.registry, msg, timeout=self.search_timeout)
            for entry in entries:
                if not self._send(conn, SearchEntry(msg.msg_id, entry)):
                    return False
            return self._send(conn, SearchDone(msg.msg_id, 0, f"unreachable={unreachable}"))
        self._send(conn, ErrorMessage(f"unsupported operation: {type(msg).__name__}"))
        return False
