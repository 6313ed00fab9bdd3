import contextlib
import socket
import threading
import time

import pytest

from meshscape.agent import GiisServer, GrisAgent, ResourceProfile
from meshscape.protocol import Timeout, Unreachable, client_ping


def make_profile(hostname="node-a", seed=1, **overrides) -> ResourceProfile:
    return ResourceProfile(hostname=hostname, seed=seed, **overrides)


def ping_ok(host: str, port: int, timeout: float = 2.0) -> bool:
    try:
        return client_ping(host, port, timeout=timeout)
    except (Unreachable, Timeout):
        return False


def wait_until(predicate, timeout=5.0, interval=0.02, message="condition"):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return
        time.sleep(interval)
    raise AssertionError(f"timed out waiting for {message}")


def free_port() -> int:
    """A port that was free a moment ago; used only to get a closed port."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def start_agent(profile=None, **kwargs) -> GrisAgent:
    agent = GrisAgent(profile or make_profile(), **kwargs).start()
    wait_until(lambda: ping_ok(agent.host, agent.port), message="agent up")
    return agent


@contextlib.contextmanager
def serve_app(app, port: int | None = None):
    """Run an ASGI app on a real listening socket for the duration of a test.

    The in-process test client buffers whole responses, so anything exercising
    an unbounded stream (the SSE endpoint) has to go over actual TCP.
    """
    import uvicorn

    port = port or free_port()
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, name="uvicorn-test", daemon=True)
    thread.start()
    wait_until(lambda: server.started, timeout=10, message="http server up")
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=10)


@pytest.fixture
def agent():
    a = start_agent()
    yield a
    a.stop()


@pytest.fixture
def three_agents():
    agents = [start_agent(make_profile(f"node-{ch}", seed=i + 1)) for i, ch in enumerate("abc")]
    yield agents
    for a in agents:
        a.stop()


@pytest.fixture
def giis():
    server = GiisServer(expire_interval_ms=100).start()
    wait_until(lambda: ping_ok(server.host, server.port), message="giis up")
    yield server
    server.stop()
