"""HTTP portal: read surface, admin gating, persistence atomicity, streams."""

import io
import threading
import time

import httpx
import pytest
from fastapi.testclient import TestClient
from PIL import Image

import meshscape.service.app as service_app
from meshscape.config import (
    CONFIG_FILENAME,
    RefreshOverrides,
    ResourcePin,
    load_config,
    save_config,
    scaffold,
)
from meshscape.protocol import parse_filter
from meshscape.query import query
from meshscape.service import ServiceConfig, create_app

from .conftest import free_port, serve_app

TOKEN = "t0p-secret"


def make_portal(tmp_path, name="Bed", resources=(), period=1.0, timeout=0.2):
    portal_dir = tmp_path / "portal"
    scaffold(portal_dir, name)
    cfg = load_config(portal_dir / CONFIG_FILENAME)
    cfg.refresh = RefreshOverrides(period_seconds=period, per_resource_timeout_seconds=timeout)
    cfg.resources = list(resources)
    save_config(portal_dir / CONFIG_FILENAME, cfg)
    return portal_dir


def client_for(portal_dir, token=None) -> TestClient:
    service = ServiceConfig(
        portal_dir=portal_dir, admin_token=token, watch_interval=0.1, sse_heartbeat=0.2
    )
    return TestClient(create_app(service))


def auth():
    return {"Authorization": f"Bearer {TOKEN}"}


def agent_pin(agent, id="live", x=0.5, y=0.5) -> ResourcePin:
    return ResourcePin(id=id, name=f"Agent {id}", address=agent.host, port=agent.port, x=x, y=y)


def wait_for(client, predicate, timeout=5.0, message="condition"):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return
        time.sleep(0.05)
    raise AssertionError(f"timed out waiting for {message}")


# --- read surface ------------------------------------------------------------


def test_blank_portal_basics(tmp_path):
    with client_for(make_portal(tmp_path, name="Fresh Bed")) as client:
        testbed = client.get("/api/testbed").json()
        assert testbed["name"] == "Fresh Bed"
        assert testbed["snapshot_version"] >= 1
        assert testbed["refresh"]["period_seconds"] == 1.0
        resources = client.get("/api/resources").json()
        assert resources["resources"] == []


def test_responses_use_sorted_keys(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        response = client.get("/api/testbed")
        doc = response.json()
        assert list(doc) == sorted(doc)


def test_resource_detail_includes_cached_entries(tmp_path, agent):
    portal_dir = make_portal(tmp_path, resources=[agent_pin(agent)])
    with client_for(portal_dir) as client:
        client.post("/api/refresh", json={"id": "live"})
        detail = client.get("/api/resources/live").json()
        assert detail["status"] == "up"
        assert len(detail["entries"]) == 7
        summary = client.get("/api/resources").json()["resources"][0]
        assert "entries" not in summary
        assert summary["status"] == "up"


def test_unknown_resource_is_shaped_404(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        response = client.get("/api/resources/nope")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "unknown_resource"
        assert "message" in body


def test_assets_are_served(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        for url in ("/api/testbed/map", "/api/testbed/logo"):
            response = client.get(url)
            assert response.status_code == 200
            Image.open(io.BytesIO(response.content)).verify()


def test_placeholder_index_when_no_ui(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        response = client.get("/")
        assert response.status_code == 200
        assert "api" in response.text


# --- query endpoint ----------------------------------------------------------


def test_query_matches_direct_engine_run(tmp_path, agent):
    portal_dir = make_portal(tmp_path, resources=[agent_pin(agent)])
    with client_for(portal_dir) as client:
        client.post("/api/refresh", json={})
        body = {"filter": "(&(status=up)(cpu-count>=1))", "projection": ["cpu-count"]}
        got = client.post("/api/query", json=body).json()
        portal = client.app.state.portal
        snap = portal.manager.get_snapshot()
        want = query(snap, parse_filter(body["filter"]), ("cpu-count",))
        assert [r["matched"] for r in got["rows"]] == [r.matched for r in want]
        assert got["rows"][0]["projected"] == want[0].projected


def test_bad_filter_reports_offset(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        response = client.post("/api/query", json={"filter": "(a="})
        assert response.status_code == 400
        body = response.json()
        assert body["code"] == "bad_filter"
        assert isinstance(body["offset"], int)


def test_refresh_unknown_id_404(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        assert client.post("/api/refresh", json={"id": "ghost"}).status_code == 404


# --- admin gating ------------------------------------------------------------

ADMIN_CALLS = [
    ("POST", "/api/resources", {"json": {"x": 0.5, "y": 0.5}}),
    ("PUT", "/api/resources/someid", {"json": {"name": "X"}}),
    ("DELETE", "/api/resources/someid", {}),
    ("PUT", "/api/testbed", {"json": {"name": "X"}}),
]


def test_admin_disabled_entirely_without_token(tmp_path):
    portal_dir = make_portal(tmp_path)
    before = (portal_dir / CONFIG_FILENAME).read_bytes()
    with client_for(portal_dir, token=None) as client:
        for method, url, kwargs in ADMIN_CALLS:
            for headers in ({}, auth(), {"Authorization": "Bearer guess"}):
                response = client.request(method, url, headers=headers, **kwargs)
                assert response.status_code == 403, (method, url, headers)
                assert response.json()["code"] == "admin_disabled"
        assert client.get("/api/resources").json()["resources"] == []
    assert (portal_dir / CONFIG_FILENAME).read_bytes() == before


def test_wrong_token_is_401(tmp_path):
    with client_for(make_portal(tmp_path), token=TOKEN) as client:
        for headers in ({}, {"Authorization": "Bearer nope"}, {"Authorization": "Basic abc"}):
            response = client.post("/api/resources", json={}, headers=headers)
            assert response.status_code == 401
            assert response.json()["code"] == "unauthorized"


# --- admin mutations ----------------------------------------------------------


def test_add_resource_persists_to_disk(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        response = client.post(
            "/api/resources",
            json={"id": "n1", "name": "North", "address": "10.0.0.1", "port": 2135, "x": 0.25, "y": 0.75},
            headers=auth(),
        )
        assert response.status_code == 201
        body = response.json()
        assert body["resource"]["status"] == "unknown"
        listed = client.get("/api/resources").json()["resources"]
        assert [r["id"] for r in listed] == ["n1"]
    cfg = load_config(portal_dir / CONFIG_FILENAME)
    assert cfg.pin("n1").name == "North"
    assert cfg.pin("n1").x == 0.25


def test_add_defaults_fill_in(tmp_path):
    with client_for(make_portal(tmp_path), token=TOKEN) as client:
        body = client.post("/api/resources", json={"x": 0.1, "y": 0.2}, headers=auth()).json()
        resource = body["resource"]
        assert resource["name"] == "New Resource"
        assert resource["address"] == "localhost"
        assert resource["port"] == 2135
        assert (resource["x"], resource["y"]) == (0.1, 0.2)


def test_add_duplicate_is_409(tmp_path):
    with client_for(make_portal(tmp_path), token=TOKEN) as client:
        client.post("/api/resources", json={"id": "dup"}, headers=auth())
        response = client.post("/api/resources", json={"id": "dup"}, headers=auth())
        assert response.status_code == 409
        assert response.json()["code"] == "duplicate_resource"


def test_drag_updates_position_and_persists(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        client.post("/api/resources", json={"id": "d1"}, headers=auth())
        response = client.put("/api/resources/d1", json={"x": 0.9, "y": 0.05}, headers=auth())
        assert response.status_code == 200
        assert response.json()["resource"]["x"] == 0.9
    pin = load_config(portal_dir / CONFIG_FILENAME).pin("d1")
    assert (pin.x, pin.y) == (0.9, 0.05)


def test_endpoint_edit_resets_status(tmp_path, agent):
    portal_dir = make_portal(tmp_path, resources=[agent_pin(agent)])
    with client_for(portal_dir, token=TOKEN) as client:
        client.post("/api/refresh", json={})
        assert client.get("/api/resources/live").json()["status"] == "up"
        client.put("/api/resources/live", json={"port": free_port()}, headers=auth())
        detail = client.get("/api/resources/live").json()
        assert detail["status"] == "unknown"
        assert detail["entries"] == []


def test_delete_removes_everywhere(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        client.post("/api/resources", json={"id": "gone"}, headers=auth())
        assert client.delete("/api/resources/gone", headers=auth()).status_code == 200
        assert client.get("/api/resources/gone").status_code == 404
    assert load_config(portal_dir / CONFIG_FILENAME).resources == []


def test_validation_error_is_shaped_400(tmp_path):
    with client_for(make_portal(tmp_path), token=TOKEN) as client:
        response = client.post("/api/resources", json={"id": "x", "port": 99999}, headers=auth())
        assert response.status_code == 400
        assert response.json()["code"] == "validation"
        assert client.get("/api/resources").json()["resources"] == []


def test_rename_testbed_persists(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        assert client.put("/api/testbed", json={"name": "Renamed"}, headers=auth()).status_code == 200
        assert client.get("/api/testbed").json()["name"] == "Renamed"
    assert load_config(portal_dir / CONFIG_FILENAME).name == "Renamed"


def test_failed_save_changes_nothing(tmp_path, monkeypatch):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        before_disk = (portal_dir / CONFIG_FILENAME).read_bytes()
        before_version = client.get("/api/resources").json()["version"]

        def refuse(path, cfg):
            raise OSError("disk full")

        monkeypatch.setattr(service_app, "save_config", refuse)
        response = client.post("/api/resources", json={"id": "doomed"}, headers=auth())
        assert response.status_code == 500
        assert response.json()["code"] == "io_error"
        monkeypatch.undo()
        assert (portal_dir / CONFIG_FILENAME).read_bytes() == before_disk
        assert client.get("/api/resources").json()["version"] == before_version
        assert client.get("/api/resources/doomed").status_code == 404


# --- uploads ------------------------------------------------------------------


def png_bytes(size=(4, 4), color=(0, 128, 0)) -> bytes:
    buffer = io.BytesIO()
    Image.new("RGB", size, color).save(buffer, format="PNG")
    return buffer.getvalue()


def test_logo_upload_replaces_asset(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        data = png_bytes(color=(200, 10, 10))
        response = client.put(
            "/api/testbed/logo", files={"file": ("logo.png", data, "image/png")}, headers=auth()
        )
        assert response.status_code == 200
        assert client.get("/api/testbed/logo").content == data


def test_oversized_upload_rejected(tmp_path):
    with client_for(make_portal(tmp_path), token=TOKEN) as client:
        blob = b"\x89PNG" + b"\x00" * (service_app.MAX_UPLOAD_BYTES + 8)
        response = client.put(
            "/api/testbed/map", files={"file": ("map.png", blob, "image/png")}, headers=auth()
        )
        assert response.status_code == 413
        assert response.json()["code"] == "too_large"


def test_non_image_upload_rejected(tmp_path):
    with client_for(make_portal(tmp_path), token=TOKEN) as client:
        response = client.put(
            "/api/testbed/map", files={"file": ("map.png", b"plain text", "image/png")}, headers=auth()
        )
        assert response.status_code == 400
        assert response.json()["code"] == "unreadable_asset"


# --- change notification ------------------------------------------------------


def test_event_stream_reports_mutations(tmp_path):
    service = ServiceConfig(
        portal_dir=make_portal(tmp_path), admin_token=TOKEN, watch_interval=0.1, sse_heartbeat=0.2
    )
    with serve_app(create_app(service)) as base:
        def mutate_soon():
            time.sleep(0.3)
            httpx.post(f"{base}/api/resources", json={"id": "evt"}, headers=auth())

        thread = threading.Thread(target=mutate_soon)
        thread.start()
        events = []
        with httpx.stream("GET", f"{base}/api/events", timeout=10) as stream:
            for line in stream.iter_lines():
                if line.startswith("data: "):
                    events.append(service_app.canonical.loads(line[len("data: "):]))
                    if len(events) == 2:
                        break
        thread.join()
        assert events[1]["version"] == events[0]["version"] + 1
        assert events[1]["changed_ids"] == ["evt"]


def test_long_poll_returns_on_next_version(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir, token=TOKEN) as client:
        current = client.get("/api/resources").json()["version"]

        def mutate_soon():
            time.sleep(0.2)
            client.post("/api/resources", json={"id": "lp"}, headers=auth())

        thread = threading.Thread(target=mutate_soon)
        thread.start()
        response = client.get(f"/api/snapshot-version?after={current}&timeout_seconds=5")
        thread.join()
        assert response.json()["version"] > current


def test_long_poll_immediate_when_behind(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        started = time.monotonic()
        response = client.get("/api/snapshot-version?after=0")
        assert time.monotonic() - started < 1.0
        assert response.json()["version"] >= 1


def test_long_poll_times_out_quietly(tmp_path):
    with client_for(make_portal(tmp_path)) as client:
        current = client.get("/api/resources").json()["version"]
        response = client.get(f"/api/snapshot-version?after={current}&timeout_seconds=0.2")
        assert response.json()["version"] == current


# --- hand edits ---------------------------------------------------------------


def test_hand_edited_config_hot_reloads(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir) as client:
        cfg = load_config(portal_dir / CONFIG_FILENAME)
        cfg.resources.append(ResourcePin(id="manual", name="By Hand", address="10.9.9.9", port=2135, x=0.4, y=0.4))
        save_config(portal_dir / CONFIG_FILENAME, cfg)
        wait_for(
            client,
            lambda: [r["id"] for r in client.get("/api/resources").json()["resources"]] == ["manual"],
            message="hot reload",
        )
        assert client.get("/api/resources/manual").json()["name"] == "By Hand"


def test_broken_hand_edit_is_ignored(tmp_path):
    portal_dir = make_portal(tmp_path)
    with client_for(portal_dir) as client:
        (portal_dir / CONFIG_FILENAME).write_text("{ not json", encoding="utf-8")
        time.sleep(0.4)
        assert client.get("/api/testbed").status_code == 200  # still serving the old state


def test_live_polling_marks_agents_up(tmp_path, agent):
    portal_dir = make_portal(tmp_path, resources=[agent_pin(agent)], period=0.5, timeout=0.2)
    with client_for(portal_dir) as client:
        wait_for(
            client,
            lambda: [r["status"] for r in client.get("/api/resources").json()["resources"]] == ["up"],
            message="scheduler poll",
        )
