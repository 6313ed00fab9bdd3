"""Status classification, poll outcomes, and per-location apply semantics."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

import meshscape.core.model as model
from meshscape.core import (
    Location,
    PollResult,
    RefreshPolicy,
    Status,
    applied,
    classify_status,
    poll_resource,
)
from meshscape.protocol import RemoteError

from .conftest import free_port, make_profile, start_agent

POLICY = RefreshPolicy(period=30.0, per_resource_timeout=5.0, staleness_factor=3.0)
# staleness bound: 90 s


def loc(**overrides) -> Location:
    base = dict(id="a", name="A", address="127.0.0.1", port=2135, x=0.5, y=0.5)
    base.update(overrides)
    return Location(**base)


# --- classification: hand-derived truth table --------------------------------

TABLE = [
    # (last_success, last_attempt, now) -> expected
    (None, None, 1000.0, Status.UNKNOWN),
    (None, 990.0, 1000.0, Status.DOWN),  # attempted, never succeeded
    (990.0, 990.0, 1000.0, Status.UP),  # fresh success, success was the last word
    (910.0, 910.0, 1000.0, Status.UP),  # exactly at the bound still counts
    (909.9, 909.9, 1000.0, Status.STALE),  # just past the bound
    (990.0, 995.0, 1000.0, Status.DOWN),  # failing but success still fresh
    (880.0, 995.0, 1000.0, Status.STALE),  # failing and success too old
    (0.0, 999.0, 1000.0, Status.STALE),  # ancient success, failing since
    (1000.0, 1000.0, 1000.0, Status.UP),  # success this instant
]


@pytest.mark.parametrize("last_success,last_attempt,now,expected", TABLE)
def test_classification_table(last_success, last_attempt, now, expected):
    assert classify_status(last_success, last_attempt, now, POLICY) is expected


times = st.floats(0, 10_000, allow_nan=False)


@given(st.none() | times, st.none() | times, times)
def test_classification_properties(last_success, last_attempt, now):
    status = classify_status(last_success, last_attempt, now, POLICY)
    if last_attempt is None:
        assert status is Status.UNKNOWN
    else:
        assert status is not Status.UNKNOWN
    if status is Status.UP:
        assert last_success is not None and now - last_success <= POLICY.staleness_bound
    if status is Status.STALE:
        assert last_success is not None  # a success must have existed


# --- poll_resource -----------------------------------------------------------


def test_poll_live_agent_succeeds_with_full_tree(agent):
    result = poll_resource(loc(address=agent.host, port=agent.port), POLICY)
    assert result.ok
    assert len(result.entries) == 7
    assert result.error == ""
    assert result.duration < POLICY.per_resource_timeout


def test_poll_closed_port_is_unreachable_not_an_exception():
    result = poll_resource(loc(port=free_port()), POLICY)
    assert not result.ok
    assert result.error == "unreachable"
    assert result.entries == ()


def test_poll_slow_agent_times_out():
    slow = start_agent(make_profile("slow"), delay_ms=500)
    try:
        policy = RefreshPolicy(period=30.0, per_resource_timeout=0.1)
        result = poll_resource(loc(address=slow.host, port=slow.port), policy)
    finally:
        slow.stop()
    assert (result.ok, result.error) == (False, "timeout")


def test_poll_maps_remote_errors_to_values(monkeypatch):
    def refuse(address, port, req, timeout):
        raise RemoteError(32, "no such base")

    monkeypatch.setattr(model, "client_search", refuse)
    result = poll_resource(loc(), POLICY)
    assert (result.ok, result.error) == (False, "remote-error")
    assert "no such base" in result.message


# --- applying results --------------------------------------------------------


def success_result(agent):
    return poll_resource(loc(address=agent.host, port=agent.port), POLICY)


def test_success_replaces_entries_and_timestamps(agent):
    before = loc()
    after = applied(before, success_result(agent), now=500.0, policy=POLICY)
    assert after.status is Status.UP
    assert len(after.entries) == 7
    assert after.last_success == after.last_attempt == 500.0
    assert after.last_error is None


def test_failure_retains_entries(agent):
    up = applied(loc(), success_result(agent), now=500.0, policy=POLICY)
    failure = PollResult(False, 0.01, error="unreachable", message="connection refused")
    down = applied(up, failure, now=510.0, policy=POLICY)
    assert down.status is Status.DOWN
    assert down.entries == up.entries  # retention: last known data survives
    assert down.last_success == 500.0
    assert down.last_attempt == 510.0
    assert down.last_error == "unreachable: connection refused"


def test_persistent_failure_decays_to_stale(agent):
    state = applied(loc(), success_result(agent), now=500.0, policy=POLICY)
    failure = PollResult(False, 0.01, error="unreachable")
    state = applied(state, failure, now=530.0, policy=POLICY)
    assert state.status is Status.DOWN
    state = applied(state, failure, now=600.0, policy=POLICY)
    assert state.status is Status.STALE
    assert state.entries  # still retained even when stale


def test_recovery_returns_to_up(agent):
    state = loc()
    state = applied(state, PollResult(False, 0.01, error="unreachable"), now=100.0, policy=POLICY)
    assert state.status is Status.DOWN
    state = applied(state, success_result(agent), now=110.0, policy=POLICY)
    assert state.status is Status.UP
    assert state.last_error is None


# --- invariants --------------------------------------------------------------


def test_location_invariants():
    with pytest.raises(ValueError):
        loc(port=0)
    with pytest.raises(ValueError):
        loc(x=1.5)
    with pytest.raises(ValueError):
        loc(status=Status.UP)  # UP requires a last_success


def test_policy_invariants():
    with pytest.raises(ValueError):
        RefreshPolicy(period=1.0, per_resource_timeout=2.0)
    with pytest.raises(ValueError):
        RefreshPolicy(staleness_factor=0.5)
    with pytest.raises(ValueError):
        RefreshPolicy(max_parallel_polls=0)
