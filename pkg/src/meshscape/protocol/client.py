"""Blocking directory client: the wrapper everything else uses to talk to agents.

One connection per call; callers may run many searches concurrently.
"""

from __future__ import annotations

import itertools
import socket
import time

from .errors import ProtocolViolation, RemoteError, Timeout, Unreachable
from .types import Entry
from .wire import (
    ErrorMessage,
    FrameDecoder,
    Message,
    Ping,
    Pong,
    Register,
    RegisterAck,
    SearchDone,
    SearchEntry,
    SearchRequest,
    encode_frame,
)

_msg_ids = itertools.count(1)


def next_msg_id() -> int:
    return next(_msg_ids)


class _Conn:
    """Socket with a fixed overall deadline shared by all steps of one call."""

    def __init__(self, address: str, port: int, timeout: float):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self.deadline = time.monotonic() + timeout
        try:
            self.sock = socket.create_connection((address, port), timeout=self._remaining())
        except TimeoutError as exc:
            raise Timeout(f"connect to {address}:{port}") from exc
        except OSError as exc:
            raise Unreachable(f"connect to {address}:{port}: {exc}") from exc
        self.decoder = FrameDecoder()
        self._queued: list[Message] = []

    def _remaining(self) -> float:
        left = self.deadline - time.monotonic()
        if left <= 0:
            raise Timeout("deadline exceeded")
        return left

    def send(self, m: Message):
        try:
            self.sock.settimeout(self._remaining())
            self.sock.sendall(encode_frame(m))
        except TimeoutError as exc:
            raise Timeout("send") from exc
        except OSError as exc:
            raise Unreachable(f"send: {exc}") from exc

    def recv_message(self) -> Message:
        while True:
            try:
                self.sock.settimeout(self._remaining())
                data = self.sock.recv(65536)
            except TimeoutError as exc:
                raise Timeout("recv") from exc
            except OSError as exc:
                raise Unreachable(f"recv: {exc}") from exc
            if not data:
                raise Unreachable("connection closed before completion")
            messages = self.decoder.feed(data)
            if messages:
                self._queued = messages[1:]
                return messages[0]

    def next_message(self) -> Message:
        if self._queued:
            return self._queued.pop(0)
        return self.recv_message()

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def client_search(address: str, port: int, req: SearchRequest, timeout: float = 5.0) -> list[Entry]:
    """Run one search; collects entries until the remote signals completion.

    Raises Unreachable, Timeout, RemoteError (non-zero completion code) or
    ProtocolViolation.
    """
    conn = _Conn(address, port, timeout)
    try:
        conn.send(req)
        entries: list[Entry] = []
        while True:
            msg = conn.next_message()
            if isinstance(msg, SearchEntry):
                if msg.msg_id != req.msg_id:
                    raise ProtocolViolation(f"entry for foreign msg_id {msg.msg_id}")
                entries.append(msg.entry)
            elif isinstance(msg, SearchDone):
                if msg.msg_id != req.msg_id:
                    raise ProtocolViolation(f"done for foreign msg_id {msg.msg_id}")
                if msg.code != 0:
                    raise RemoteError(msg.code, msg.diagnostic)
                return entries
            elif isinstance(msg, ErrorMessage):
                raise ProtocolViolation(f"remote protocol error: {msg.message}")
            else:
                raise ProtocolViolation(f"unexpected message during search: {msg!r}")
    finally:
        conn.close()


def client_register(address: str, port: int, reg: Register, timeout: float = 5.0) -> bool:
    """Register with an index server; returns whether it accepted."""
    conn = _Conn(address, port, timeout)
    try:
        conn.send(reg)
        msg = conn.next_message()
        if isinstance(msg, RegisterAck):
            return msg.accepted
        if isinstance(msg, ErrorMessage):
            raise ProtocolViolation(f"remote protocol error: {msg.message}")
        raise ProtocolViolation(f"unexpected reply to register: {msg!r}")
    finally:
        conn.close()


def client_ping(address: str, port: int, nonce: int = 0, timeout: float = 5.0) -> bool:
    """Liveness probe; true when the remote echoes the nonce."""
    conn = _Conn(address, port, timeout)
    try:
        conn.send(Ping(nonce))
        msg = conn.next_message()
        return isinstance(msg, Pong) and msg.nonce == nonce
    finally:
        conn.close()
