"""Errors raised by the directory protocol codec and client."""

from __future__ import annotations


class ProtocolViolation(Exception):
    """Malformed frame or body; the connection carrying it must be dropped."""


class OversizeMessage(ProtocolViolation):
    """Encoded body would exceed the 1 MiB frame limit."""


class Unreachable(Exception):
    """Connect or socket I/O failure while talking to a directory endpoint."""


class Timeout(Exception):
    """Deadline expired before the remote answered."""


class RemoteError(Exception):
    """The remote completed the search with a non-zero result code."""

    def __init__(self, code: int, diagnostic: str = ""):
        super().__init__(f"remote error {code}: {diagnostic}" if diagnostic else f"remote error {code}")
        self.code = code
        self.diagnostic = diagnostic
