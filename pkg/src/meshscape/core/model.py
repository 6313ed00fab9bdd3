"""Domain types for the cached testbed model: locations, snapshots, polling.

Status is classified from the two poll timestamps at publication time:

    no attempt yet                               -> UNKNOWN
    never succeeded                              -> DOWN
    last attempt succeeded, success fresh        -> UP
    last attempt failed, success still fresh     -> DOWN
    success exists but older than the bound      -> STALE

"fresh" means now - last_success <= staleness_factor * period.  Whether the
last attempt succeeded is recoverable from the timestamps alone: on success
both are set to the same instant, so last_success >= last_attempt.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, replace

from ..config import ResourcePin
from ..protocol import (
    Entry,
    Presence,
    ProtocolViolation,
    RemoteError,
    Scope,
    SearchRequest,
    Timeout,
    Unreachable,
    client_search,
    next_msg_id,
)


class Status(enum.Enum):
    UNKNOWN = "unknown"
    UP = "up"
    DOWN = "down"
    STALE = "stale"


class UnknownResource(KeyError):
    def __init__(self, id: str):
        super().__init__(id)
        self.id = id

    def __str__(self):
        return f"no such resource: {self.id}"


class DuplicateResource(ValueError):
    def __init__(self, id: str):
        super().__init__(f"resource id already present: {id}")
        self.id = id


@dataclass(frozen=True)
class RefreshPolicy:
    period: float = 30.0
    per_resource_timeout: float = 5.0
    staleness_factor: float = 3.0
    max_parallel_polls: int = 8

    def __post_init__(self):
        if not self.per_resource_timeout > 0:
            raise ValueError("per_resource_timeout must be positive")
        if not self.period > self.per_resource_timeout:
            raise ValueError("period must exceed per_resource_timeout")
        if not self.staleness_factor >= 1:
            raise ValueError("staleness_factor must be at least 1")
        if not self.max_parallel_polls >= 1:
            raise ValueError("max_parallel_polls must be at least 1")

    @property
    def staleness_bound(self) -> float:
        return self.staleness_factor * self.period


@dataclass(frozen=True)
class Location:
    """One monitored resource: identity, endpoint, map position, cached state."""

    id: str
    name: str
    address: str
    port: int
    x: float
    y: float
    country: str = ""
    status: Status = Status.UNKNOWN
    entries: tuple[Entry, ...] = ()
    last_success: float | None = None
    last_attempt: float | None = None
    last_error: str | None = None

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError("position components must lie in [0, 1]")
        if self.status is Status.UP and self.last_success is None:
            raise ValueError("an UP location must have a last_success")
        if self.entries and self.last_success is None:
            raise ValueError("cached entries require a last_success")

    @classmethod
    def from_pin(cls, pin: ResourcePin) -> "Location":
        return cls(
            id=pin.id, name=pin.name, address=pin.address, port=pin.port,
            x=pin.x, y=pin.y, country=pin.country,
        )

    def to_pin(self) -> ResourcePin:
        return ResourcePin(
            id=self.id, name=self.name, address=self.address, port=self.port,
            x=self.x, y=self.y, country=self.country,
        )


@dataclass(frozen=True)
class Snapshot:
    """Immutable, versioned view of every location at one publication point."""

    version: int
    taken_at: float
    locations: tuple[Location, ...]

    def get(self, id: str) -> Location | None:
        return next((loc for loc in self.locations if loc.id == id), None)

    def require(self, id: str) -> Location:
        loc = self.get(id)
        if loc is None:
            raise UnknownResource(id)
        return loc


@dataclass(frozen=True)
class ChangeEvent:
    version: int
    changed_ids: tuple[str, ...]
    taken_at: float


@dataclass(frozen=True)
class PollResult:
    """Outcome of one resource poll; failures are values, never exceptions."""

    ok: bool
    duration: float
    entries: tuple[Entry, ...] = ()
    error: str = ""  # machine kind: unreachable | timeout | remote-error | protocol
    message: str = ""

    def describe(self) -> str:
        return f"{self.error}: {self.message}" if self.message else self.error


def classify_status(
    last_success: float | None,
    last_attempt: float | None,
    now: float,
    policy: RefreshPolicy,
) -> Status:
    if last_attempt is None:
        return Status.UNKNOWN
    if last_success is None:
        return Status.DOWN
    if now - last_success > policy.staleness_bound:
        return Status.STALE
    if last_success >= last_attempt:
        return Status.UP
    return Status.DOWN


def poll_resource(loc: Location, policy: RefreshPolicy) -> PollResult:
    """Search the resource's directory server for its whole tree.

    The base is left unset so the server answers from its own root; display
    names and network addresses therefore never need to agree.
    """
    req = SearchRequest(
        msg_id=next_msg_id(),
        filter=Presence("objectclass"),
        base=None,
        scope=Scope.SUB,
    )
    started = time.monotonic()
    try:
        entries = client_search(loc.address, loc.port, req, timeout=policy.per_resource_timeout)
        return PollResult(True, time.monotonic() - started, tuple(entries))
    except Timeout as exc:
        kind, message = "timeout", str(exc)
    except Unreachable as exc:
        kind, message = "unreachable", str(exc)
    except RemoteError as exc:
        kind, message = "remote-error", f"code {exc.code}: {exc.diagnostic}"
    except ProtocolViolation as exc:
        kind, message = "protocol", str(exc)
    return PollResult(False, time.monotonic() - started, error=kind, message=message)


def applied(loc: Location, result: PollResult, now: float, policy: RefreshPolicy) -> Location:
    """The location after absorbing one poll result.

    Success replaces the cached entries; failure retains them and only the
    timestamps, error text and classification move.
    """
    if result.ok:
        return replace(
            loc,
            entries=result.entries,
            last_success=now,
            last_attempt=now,
            last_error=None,
            status=classify_status(now, now, now, policy),
        )
    return replace(
        loc,
        last_attempt=now,
        last_error=result.describe(),
        status=classify_status(loc.last_success, now, now, policy),
    )
