"""Per-resource directory server: publishes one resource's entry tree over the wire.

Scope/filter/projection evaluation lives in `serve_search` so it can be tested
without sockets; `GrisAgent` is the TCP wrapper.  Connections are handled
concurrently, but requests on one connection are answered in order.
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from ..protocol import (
    CODE_NO_SUCH_BASE,
    Dn,
    Entry,
    ErrorMessage,
    FrameDecoder,
    Ping,
    Pong,
    ProtocolViolation,
    Register,
    Scope,
    SearchDone,
    SearchEntry,
    SearchRequest,
    client_register,
    encode_frame,
    match_entry,
)
from .collect import collect, root_dn
from .profile import ResourceProfile

log = logging.getLogger(__name__)


class SearchFailed(Exception):
    """Search cannot complete; mapped to a non-zero completion code on the wire."""

    def __init__(self, code: int, diagnostic: str):
        super().__init__(f"{code}: {diagnostic}")
        self.code = code
        self.diagnostic = diagnostic


class GrisState:
    """One resource's published tree, pinned to a single tick per read."""

    def __init__(self, profile: ResourceProfile, tick: int = 0):
        profile.validate()
        self.profile = profile
        self.tick = tick

    @property
    def root(self) -> Dn:
        return root_dn(self.profile.hostname)

    def entries(self) -> list[Entry]:
        return collect(self.profile, self.tick)


def _project(entry: Entry, attrs: tuple[str, ...]) -> Entry:
    if not attrs:
        return entry
    keep = set(attrs) | {"objectclass"}
    return Entry(entry.dn, {k: list(v) for k, v in entry.attributes.items() if k in keep})


def serve_search(state: GrisState, req: SearchRequest) -> list[Entry]:
    """Evaluate a search against the tree: base+scope selection, filter, projection.

    Raises SearchFailed(code 32) when the base names no entry.
    """
    entries = state.entries()
    base = req.base or state.root
    if not any(e.dn == base for e in entries):
        raise SearchFailed(CODE_NO_SUCH_BASE, f"no such base: {base.text()}")
    if req.scope is Scope.BASE:
        selected = [e for e in entries if e.dn == base]
    elif req.scope is Scope.ONE:
        selected = [e for e in entries if e.dn.is_child_of(base)]
    else:
        selected = [e for e in entries if e.dn.is_under(base)]
    return [_project(e, req.attrs) for e in selected if match_entry(e, req.filter)]


class _TcpServer:
    """Accept loop + per-connection threads shared by the agent and index servers."""

    def __init__(self, host: str, port: int, name: str):
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(32)
        self.host, self.port = self._listener.getsockname()[:2]
        self._name = name
        self._stop = threading.Event()
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list[threading.Thread] = []

    def start(self):
        self._accept_thread = threading.Thread(target=self._accept_loop, name=self._name, daemon=True)
        self._accept_thread.start()
        return self

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return  # listener closed
            t = threading.Thread(target=self._conn_loop, args=(conn,), daemon=True)
            self._conn_threads.append(t)
            t.start()

    def _conn_loop(self, conn: socket.socket):
        decoder = FrameDecoder()
        try:
            with conn:
                conn.settimeout(30.0)
                while not self._stop.is_set():
                    try:
                        data = conn.recv(65536)
                    except (TimeoutError, OSError):
                        return
                    if not data:
                        return
                    try:
                        messages = decoder.feed(data)
                    except ProtocolViolation as exc:
                        self._send(conn, ErrorMessage(str(exc)))
                        return  # drop the connection
                    for msg in messages:
                        if not self.handle(conn, msg):
                            return
        finally:
            conn.close()

    def _send(self, conn: socket.socket, msg) -> bool:
        try:
            conn.sendall(encode_frame(msg))
            return True
        except OSError:
            return False

    def handle(self, conn: socket.socket, msg) -> bool:
        raise NotImplementedError

    def stop(self):
        self._stop.set()
        try:
            # close() alone does not wake a thread blocked in accept()
            self._listener.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._listener.close()
        except OSError:
            pass
        if self._accept_thread:
            self._accept_thread.join(timeout=2)


class GrisAgent(_TcpServer):
    """TCP agent for one resource.

    tick_ms controls how fast simulated dynamics advance (0 = frozen at tick 0).
    delay_ms adds an artificial pause before each reply, for timeout testing.
    When register_to is set, the agent re-registers with that index server at
    half-TTL intervals until stopped.
    """

    def __init__(
        self,
        profile: ResourceProfile,
        host: str = "127.0.0.1",
        port: int = 0,
        tick_ms: int = 0,
        delay_ms: int = 0,
        register_to: tuple[str, int] | None = None,
        ttl_seconds: int = 60,
        advertise_address: str | None = None,
    ):
        super().__init__(host, port, name=f"gris:{profile.hostname}")
        profile.validate()
        self.profile = profile
        self.tick_ms = tick_ms
        self.delay_ms = delay_ms
        self.register_to = register_to
        self.ttl_seconds = ttl_seconds
        self.advertise_address = advertise_address or ("127.0.0.1" if host in ("0.0.0.0", "") else host)
        self._started_at = time.monotonic()
        self._heartbeat: threading.Thread | None = None

    def start(self):
        super().start()
        self._started_at = time.monotonic()
        if self.register_to:
            self._heartbeat = threading.Thread(target=self._heartbeat_loop, daemon=True)
            self._heartbeat.start()
        return self

    def current_tick(self) -> int:
        if self.tick_ms <= 0:
            return 0
        return int((time.monotonic() - self._started_at) * 1000 / self.tick_ms)

    def state(self) -> GrisState:
        return GrisState(self.profile, self.current_tick())

    def entries_now(self) -> list[Entry]:
        return self.state().entries()

    def handle(self, conn: socket.socket, msg) -> bool:
        if self.delay_ms:
            time.sleep(self.delay_ms / 1000.0)
        if isinstance(msg, Ping):
            return self._send(conn, Pong(msg.nonce))
        if isinstance(msg, SearchRequest):
            try:
                found = serve_search(self.state(), msg)
            except SearchFailed as exc:
                return self._send(conn, SearchDone(msg.msg_id, exc.code, exc.diagnostic))
            for entry in found:
                if not self._send(conn, SearchEntry(msg.msg_id, entry)):
                    return False
            return self._send(conn, SearchDone(msg.msg_id, 0, ""))
        self._send(conn, ErrorMessage(f"unsupported operation: {type(msg).__name__}"))
        return False

    def _heartbeat_loop(self):
        host, port = self.register_to
        reg = Register(root_dn(self.profile.hostname), self.advertise_address, self.port, self.ttl_seconds)
        interval = max(self.ttl_seconds / 2.0, 0.5)
        while not self._stop.is_set():
            try:
                accepted = client_register(host, port, reg, timeout=5.0)
                if not accepted:
                    log.warning("index server %s:%s rejected registration of %s", host, port, reg.dn.text())
            except Exception as exc:
                log.warning("registration with %s:%s failed: %s", host, port, exc)
            self._stop.wait(interval)
