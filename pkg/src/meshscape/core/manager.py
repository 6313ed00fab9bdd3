"""The shared testbed cache: one manager per loaded testbed per process.

Concurrency contract
--------------------
* ``get_snapshot`` is wait-free: it reads one attribute whose assignment is
  atomic, so readers never wait on polls or writers.
* Applies and structural mutations serialize on one lock; each publishes a
  complete new snapshot (readers see old or new, never a mix).
* Poll I/O runs in a bounded worker pool, never under the lock.
* Subscribers get their own queues; a slow subscriber's queue coalesces
  adjacent events rather than growing without bound, and versions it observes
  are always strictly increasing.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import replace

from ..config import ConfigValidationError, ResourcePin, TestbedConfig
from .model import (
    ChangeEvent,
    DuplicateResource,
    Location,
    PollResult,
    RefreshPolicy,
    Snapshot,
    Status,
    UnknownResource,
    applied,
    poll_resource,
)

_EVENT_QUEUE_LIMIT = 256


class Subscription:
    """One observer's private event queue.

    ``get`` blocks until an event arrives (or the timeout lapses -> None).
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._events: deque[ChangeEvent] = deque()
        self.closed = False

    def _push(self, event: ChangeEvent):
        with self._cond:
            self._events.append(event)
            if len(self._events) > _EVENT_QUEUE_LIMIT:
                first = self._events.popleft()
                second = self._events.popleft()
                merged_ids = first.changed_ids + tuple(
                    i for i in second.changed_ids if i not in first.changed_ids
                )
                self._events.appendleft(ChangeEvent(second.version, merged_ids, second.taken_at))
            self._cond.notify_all()

    def get(self, timeout: float | None = None) -> ChangeEvent | None:
        with self._cond:
            if not self._cond.wait_for(lambda: self._events or self.closed, timeout):
                return None
            if not self._events:
                return None  # closed and drained
            return self._events.popleft()

    def _close(self):
        with self._cond:
            self.closed = True
            self._cond.notify_all()


class TestbedManager:
    """Singleton cache over the locations of one testbed.

    Build via :func:`init_manager`; ``start()`` arms the periodic scheduler.
    """

    def __init__(self, locations: list[Location], policy: RefreshPolicy):
        self.policy = policy
        self._lock = threading.RLock()
        self._snapshot = Snapshot(1, time.time(), tuple(locations))
        self._subscribers: list[Subscription] = []
        self._pool = ThreadPoolExecutor(
            max_workers=policy.max_parallel_polls, thread_name_prefix="poll"
        )
        self._scheduler: threading.Thread | None = None
        self._stop = threading.Event()
        self._poll = poll_resource  # injectable seam for tests

    # -- reads ---------------------------------------------------------------

    def get_snapshot(self) -> Snapshot:
        return self._snapshot

    # -- publication ---------------------------------------------------------

    def _publish(self, locations: tuple[Location, ...], changed_ids: tuple[str, ...]) -> int:
        """Caller must hold the lock."""
        old = self._snapshot
        snapshot = Snapshot(old.version + 1, time.time(), locations)
        self._snapshot = snapshot
        event = ChangeEvent(snapshot.version, changed_ids, snapshot.taken_at)
        for sub in self._subscribers:
            sub._push(event)
        return snapshot.version

    def apply_poll_result(self, id: str, result: PollResult, now: float | None = None) -> int:
        with self._lock:
            snap = self._snapshot
            loc = snap.require(id)
            now = time.time() if now is None else now
            updated = applied(loc, result, now, self.policy)
            locations = tuple(updated if l.id == id else l for l in snap.locations)
            return self._publish(locations, (id,))

    # -- polling -------------------------------------------------------------

    def refresh_now(self, id: str | None = None) -> int:
        """Poll one resource (or all of them) and return the resulting version.

        Polls run outside the lock with bounded parallelism; each result is
        applied (and published) as it lands.  Resources removed while their
        poll was in flight are dropped silently.
        """
        snap = self._snapshot
        if id is not None:
            loc = snap.require(id)
            return self._poll_and_apply(loc)
        if not snap.locations:
            return snap.version
        futures = [self._pool.submit(self._poll_and_apply, loc) for loc in snap.locations]
        wait(futures)
        return self._snapshot.version

    def _poll_and_apply(self, loc: Location) -> int:
        result = self._poll(loc, self.policy)
        try:
            return self.apply_poll_result(loc.id, result)
        except UnknownResource:
            return self._snapshot.version

    # -- scheduler -----------------------------------------------------------

    def start(self) -> "TestbedManager":
        """Arm periodic polling: one full sweep immediately, then every period."""
        with self._lock:
            if self._scheduler is not None:
                return self
            self._stop.clear()
            self._scheduler = threading.Thread(
                target=self._run_scheduler, name="poll-scheduler", daemon=True
            )
            self._scheduler.start()
        return self

    def _run_scheduler(self):
        while not self._stop.is_set():
            try:
                self.refresh_now()
            except Exception:  # a sweep must never kill the scheduler
                pass
            if self._stop.wait(self.policy.period):
                return

    def stop(self):
        self._stop.set()
        with self._lock:
            scheduler, self._scheduler = self._scheduler, None
        if scheduler is not None:
            scheduler.join(timeout=10)
        self._pool.shutdown(wait=False, cancel_futures=True)
        with self._lock:
            for sub in self._subscribers:
                sub._close()
            self._subscribers.clear()

    # -- observers -----------------------------------------------------------

    def subscribe(self) -> Subscription:
        sub = Subscription()
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription):
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
        sub._close()

    # -- structural mutations ------------------------------------------------

    def add_resource(self, pin: ResourcePin) -> int:
        problems = pin.problems()
        if problems:
            raise ConfigValidationError(problems)
        with self._lock:
            snap = self._snapshot
            if snap.get(pin.id) is not None:
                raise DuplicateResource(pin.id)
            locations = snap.locations + (Location.from_pin(pin),)
            return self._publish(locations, (pin.id,))

    _EDITABLE = frozenset({"name", "address", "port", "x", "y", "country"})

    def update_resource(self, id: str, **fields) -> int:
        unknown = set(fields) - self._EDITABLE
        if unknown:
            raise ConfigValidationError([f"not an editable field: {name}" for name in sorted(unknown)])
        with self._lock:
            snap = self._snapshot
            loc = snap.require(id)
            problems = replace(loc.to_pin(), **fields).problems()
            if problems:
                raise ConfigValidationError(problems)
            endpoint_changed = (
                fields.get("address", loc.address) != loc.address
                or fields.get("port", loc.port) != loc.port
            )
            updated = replace(loc, **fields)
            if endpoint_changed:
                # cached data came from the old endpoint; it must not linger
                updated = replace(
                    updated,
                    status=Status.UNKNOWN,
                    entries=(),
                    last_success=None,
                    last_attempt=None,
                    last_error=None,
                )
            locations = tuple(updated if l.id == id else l for l in snap.locations)
            return self._publish(locations, (id,))

    def remove_resource(self, id: str) -> int:
        with self._lock:
            snap = self._snapshot
            snap.require(id)
            locations = tuple(l for l in snap.locations if l.id != id)
            return self._publish(locations, (id,))

    def to_pins(self) -> list[ResourcePin]:
        return [loc.to_pin() for loc in self._snapshot.locations]


def policy_from_config(cfg: TestbedConfig, base: RefreshPolicy | None = None) -> RefreshPolicy:
    base = base or RefreshPolicy()
    ov = cfg.refresh
    try:
        return RefreshPolicy(
            period=ov.period_seconds if ov.period_seconds is not None else base.period,
            per_resource_timeout=(
                ov.per_resource_timeout_seconds
                if ov.per_resource_timeout_seconds is not None
                else base.per_resource_timeout
            ),
            staleness_factor=(
                ov.staleness_factor if ov.staleness_factor is not None else base.staleness_factor
            ),
            max_parallel_polls=(
                ov.max_parallel_polls if ov.max_parallel_polls is not None else base.max_parallel_polls
            ),
        )
    except ValueError as exc:
        raise ConfigValidationError([f"refresh settings: {exc}"]) from exc


def init_manager(cfg: TestbedConfig, policy: RefreshPolicy | None = None) -> TestbedManager:
    """Build the cache from a validated config: v1 snapshot, everything UNKNOWN.

    The scheduler is armed but idle until ``start()``; no poll runs before then.
    """
    cfg.validate()
    if policy is None:
        policy = policy_from_config(cfg)
    locations = [Location.from_pin(pin) for pin in cfg.resources]
    return TestbedManager(locations, policy)
