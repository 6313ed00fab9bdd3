"""HTTP portal over the shared cache: read API, event stream, admin mutations.

Admin mutations are atomic across (manager, disk): preconditions are checked
and the new config is persisted before the in-memory change is applied, all
under one mutation lock, so a failed save mutates nothing and a 2xx means
both views agree.  The same lock serializes the config-file watcher, which
applies hand edits as a structural diff.
"""

from __future__ import annotations

import io
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import Body, Depends, FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .. import canonical
from ..config import (
    CONFIG_FILENAME,
    ConfigValidationError,
    ResourcePin,
    TestbedConfig,
    default_pin,
    load_config,
    save_config,
)
from ..core import (
    DuplicateResource,
    Location,
    TestbedManager,
    UnknownResource,
    init_manager,
    policy_from_config,
)
from ..protocol import FilterSyntaxError, parse_filter
from ..query import query

log = logging.getLogger(__name__)

MAX_UPLOAD_BYTES = 5 * 1024 * 1024


@dataclass
class ServiceConfig:
    portal_dir: str | Path
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    admin_token: str | None = None
    cors_origins: list[str] = field(default_factory=list)
    ui_dir: str | Path | None = None
    watch_interval: float = 0.5
    sse_heartbeat: float = 15.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra

    def body(self) -> dict:
        return {"code": self.code, "message": self.message, **self.extra}


class CanonicalResponse(JSONResponse):
    def render(self, content) -> bytes:
        return canonical.dumps(content).encode("utf-8")


def summarize(loc: Location) -> dict:
    return {
        "id": loc.id,
        "name": loc.name,
        "address": loc.address,
        "port": loc.port,
        "x": loc.x,
        "y": loc.y,
        "country": loc.country,
        "status": loc.status.value,
        "last_success": loc.last_success,
        "last_attempt": loc.last_attempt,
        "last_error": loc.last_error,
    }


class Portal:
    """Everything the endpoints share: config, manager, persistence, watcher."""

    def __init__(self, service: ServiceConfig):
        self.service = service
        self.dir = Path(service.portal_dir)
        self.config_path = self.dir / CONFIG_FILENAME
        self.config = load_config(self.config_path)
        self.manager: TestbedManager = init_manager(self.config)
        self._lock = threading.RLock()
        self._expected_bytes = self.config_path.read_bytes()
        self._stop = threading.Event()
        self._watcher: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        self.manager.start()
        self._watcher = threading.Thread(target=self._watch_loop, name="config-watch", daemon=True)
        self._watcher.start()

    def stop(self):
        self._stop.set()
        if self._watcher is not None:
            self._watcher.join(timeout=5)
        self.manager.stop()

    # -- persistence ---------------------------------------------------------

    def _config_from_manager(self, **overrides) -> TestbedConfig:
        cfg = self.config
        return TestbedConfig(
            name=overrides.get("name", cfg.name),
            format_version=cfg.format_version,
            logo_path=cfg.logo_path,
            map_path=cfg.map_path,
            refresh=cfg.refresh,
            resources=overrides.get("resources", self.manager.to_pins()),
        )

    def _commit(self, next_cfg: TestbedConfig, apply):
        """Persist then apply, under the lock; a failed save changes nothing."""
        with self._lock:
            previous = self.config
            save_config(self.config_path, next_cfg)
            self.config = next_cfg
            self._expected_bytes = self.config_path.read_bytes()
            try:
                return apply()
            except BaseException:
                # the apply step is precondition-checked and should never fail;
                # if it does, put the disk back so both views still agree
                save_config(self.config_path, previous)
                self.config = previous
                self._expected_bytes = self.config_path.read_bytes()
                raise

    def add_pin(self, pin: ResourcePin) -> int:
        with self._lock:
            problems = pin.problems()
            if problems:
                raise ConfigValidationError(problems)
            if any(existing.id == pin.id for existing in self.manager.to_pins()):
                raise DuplicateResource(pin.id)
            next_cfg = self._config_from_manager(resources=self.manager.to_pins() + [pin])
            return self._commit(next_cfg, lambda: self.manager.add_resource(pin))

    def update_pin(self, id: str, fields: dict) -> int:
        with self._lock:
            current = next((p for p in self.manager.to_pins() if p.id == id), None)
            if current is None:
                raise UnknownResource(id)
            merged = replace(current, **fields)
            problems = merged.problems()
            if problems:
                raise ConfigValidationError(problems)
            resources = [merged if p.id == id else p for p in self.manager.to_pins()]
            next_cfg = self._config_from_manager(resources=resources)
            return self._commit(next_cfg, lambda: self.manager.update_resource(id, **fields))

    def remove_pin(self, id: str) -> int:
        with self._lock:
            if not any(p.id == id for p in self.manager.to_pins()):
                raise UnknownResource(id)
            resources = [p for p in self.manager.to_pins() if p.id != id]
            next_cfg = self._config_from_manager(resources=resources)
            return self._commit(next_cfg, lambda: self.manager.remove_resource(id))

    def rename(self, name: str):
        with self._lock:
            if not isinstance(name, str) or not name:
                raise ConfigValidationError(["name must be a non-empty string"])
            next_cfg = self._config_from_manager(name=name)
            self._commit(next_cfg, lambda: None)

    def store_asset(self, which: str, data: bytes):
        rel = self.config.logo_path if which == "logo" else self.config.map_path
        target = self.dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        return rel

    # -- hand-edit watcher ----------------------------------------------------

    def _watch_loop(self):
        complained_about = None
        while not self._stop.wait(self.service.watch_interval):
            try:
                observed = self.config_path.read_bytes()
            except OSError:
                continue
            if observed == self._expected_bytes:
                continue
            try:
                incoming = load_config(self.config_path)
            except Exception as exc:
                if observed != complained_about:
                    log.warning("ignoring unloadable edit of %s: %s", self.config_path, exc)
                    complained_about = observed
                continue
            complained_about = None
            try:
                self._absorb_external(incoming, observed)
                log.info("applied external edit of %s", self.config_path)
            except Exception as exc:
                log.warning("could not apply external edit: %s", exc)

    def _absorb_external(self, incoming: TestbedConfig, observed: bytes):
        with self._lock:
            if observed != self.config_path.read_bytes():
                return  # changed again; next tick will see it
            mgr = self.manager
            current = {p.id: p for p in mgr.to_pins()}
            wanted = {p.id: p for p in incoming.resources}
            for id in current.keys() - wanted.keys():
                mgr.remove_resource(id)
            for id, pin in wanted.items():
                if id not in current:
                    mgr.add_resource(pin)
                elif pin != current[id]:
                    mgr.update_resource(
                        id, name=pin.name, address=pin.address, port=pin.port,
                        x=pin.x, y=pin.y, country=pin.country,
                    )
            mgr.policy = policy_from_config(incoming, mgr.policy)
            self.config = incoming
            self._expected_bytes = observed


def _coerce_position(value, axis: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError([f"{axis} must be a number in [0, 1]"])
    return float(value)


def create_app(service: ServiceConfig) -> FastAPI:
    portal = Portal(service)
    app = FastAPI(
        default_response_class=CanonicalResponse,
        docs_url=None,
        redoc_url=None,
        openapi_url=None,
        on_startup=[portal.start],
        on_shutdown=[portal.stop],
    )
    app.state.portal = portal

    if service.cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=service.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    # -- error shape ---------------------------------------------------------

    def error(status: int, code: str, message: str, **extra) -> CanonicalResponse:
        return CanonicalResponse({"code": code, "message": message, **extra}, status_code=status)

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return CanonicalResponse(exc.body(), status_code=exc.status)

    @app.exception_handler(UnknownResource)
    async def _unknown(request: Request, exc: UnknownResource):
        return error(404, "unknown_resource", str(exc))

    @app.exception_handler(DuplicateResource)
    async def _duplicate(request: Request, exc: DuplicateResource):
        return error(409, "duplicate_resource", str(exc))

    @app.exception_handler(ConfigValidationError)
    async def _invalid(request: Request, exc: ConfigValidationError):
        return error(400, "validation", str(exc), problems=exc.problems)

    @app.exception_handler(FilterSyntaxError)
    async def _bad_filter(request: Request, exc: FilterSyntaxError):
        return error(400, "bad_filter", str(exc), offset=exc.offset)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return error(400, "validation", "malformed request body")

    @app.exception_handler(OSError)
    async def _io_error(request: Request, exc: OSError):
        log.error("i/o failure serving %s: %s", request.url.path, exc)
        return error(500, "io_error", "persistence failed; nothing was changed")

    # -- auth ----------------------------------------------------------------

    def require_admin(request: Request):
        token = service.admin_token
        if not token:
            raise ApiError(403, "admin_disabled", "this portal is read-only: no admin token is configured")
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise ApiError(401, "unauthorized", "missing or incorrect bearer token")

    admin = Depends(require_admin)

    # -- read endpoints -------------------------------------------------------

    @app.get("/api/testbed")
    def get_testbed():
        cfg = portal.config
        policy = portal.manager.policy
        return {
            "name": cfg.name,
            "map_url": "/api/testbed/map",
            "logo_url": "/api/testbed/logo",
            "refresh": {
                "period_seconds": policy.period,
                "per_resource_timeout_seconds": policy.per_resource_timeout,
                "staleness_factor": policy.staleness_factor,
                "max_parallel_polls": policy.max_parallel_polls,
            },
            "snapshot_version": portal.manager.get_snapshot().version,
        }

    @app.get("/api/resources")
    def get_resources():
        snap = portal.manager.get_snapshot()
        return {
            "version": snap.version,
            "taken_at": snap.taken_at,
            "resources": [summarize(loc) for loc in snap.locations],
        }

    @app.get("/api/resources/{id}")
    def get_resource(id: str):
        loc = portal.manager.get_snapshot().require(id)
        doc = summarize(loc)
        doc["entries"] = [entry.to_doc() for entry in loc.entries]
        return doc

    @app.post("/api/query")
    def post_query(payload: dict = Body(...)):
        text = payload.get("filter")
        if not isinstance(text, str):
            raise ApiError(400, "validation", "a filter string is required")
        projection = payload.get("projection", [])
        if not isinstance(projection, list) or not all(isinstance(a, str) for a in projection):
            raise ApiError(400, "validation", "projection must be a list of attribute names")
        parsed = parse_filter(text)
        snap = portal.manager.get_snapshot()
        rows = query(snap, parsed, tuple(projection))
        return {
            "version": snap.version,
            "rows": [
                {
                    "id": r.id,
                    "name": r.name,
                    "status": r.status.value,
                    "matched": r.matched,
                    "projected": r.projected,
                }
                for r in rows
            ],
        }

    @app.post("/api/refresh")
    def post_refresh(payload: dict | None = Body(None)):
        id = (payload or {}).get("id")
        if id is not None and not isinstance(id, str):
            raise ApiError(400, "validation", "id must be a string")
        version = portal.manager.refresh_now(id)
        return {"version": version}

    # -- change notification --------------------------------------------------

    @app.get("/api/events")
    def get_events():
        manager = portal.manager

        def stream():
            sub = manager.subscribe()
            try:
                snap = manager.get_snapshot()
                yield _sse({"version": snap.version, "changed_ids": []})
                while True:
                    event = sub.get(timeout=service.sse_heartbeat)
                    if event is None:
                        if sub.closed:
                            return
                        yield ": keep-alive\n\n"
                    else:
                        yield _sse({"version": event.version, "changed_ids": list(event.changed_ids)})
            finally:
                manager.unsubscribe(sub)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/snapshot-version")
    def get_snapshot_version(after: int = 0, timeout_seconds: float = 25.0):
        deadline = time.monotonic() + min(max(timeout_seconds, 0.0), 30.0)
        manager = portal.manager
        if manager.get_snapshot().version > after:
            return {"version": manager.get_snapshot().version}
        sub = manager.subscribe()
        try:
            while True:
                current = manager.get_snapshot().version
                if current > after:
                    return {"version": current}
                remaining = deadline - time.monotonic()
                if remaining <= 0 or sub.get(timeout=remaining) is None and sub.closed:
                    return {"version": current}
        finally:
            manager.unsubscribe(sub)

    # -- admin endpoints -------------------------------------------------------

    @app.post("/api/resources", status_code=201, dependencies=[admin])
    def post_resource(payload: dict = Body(...)):
        x = _coerce_position(payload.get("x", 0.5), "x")
        y = _coerce_position(payload.get("y", 0.5), "y")
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ApiError(400, "validation", "position components must lie in [0, 1]")
        pin = default_pin(x, y)
        allowed = {"id", "name", "address", "port", "country"}
        unknown = set(payload) - allowed - {"x", "y"}
        if unknown:
            raise ApiError(400, "validation", f"unknown pin fields: {sorted(unknown)}")
        pin = replace(pin, **{k: payload[k] for k in allowed if k in payload})
        version = portal.add_pin(pin)
        loc = portal.manager.get_snapshot().require(pin.id)
        return {"version": version, "resource": summarize(loc)}

    @app.put("/api/resources/{id}", dependencies=[admin])
    def put_resource(id: str, payload: dict = Body(...)):
        editable = {"name", "address", "port", "x", "y", "country"}
        unknown = set(payload) - editable
        if unknown:
            raise ApiError(400, "validation", f"not editable: {sorted(unknown)}")
        fields = dict(payload)
        for axis in ("x", "y"):
            if axis in fields:
                fields[axis] = _coerce_position(fields[axis], axis)
        version = portal.update_pin(id, fields)
        return {"version": version, "resource": summarize(portal.manager.get_snapshot().require(id))}

    @app.delete("/api/resources/{id}", dependencies=[admin])
    def delete_resource(id: str):
        return {"version": portal.remove_pin(id)}

    @app.put("/api/testbed", dependencies=[admin])
    def put_testbed(payload: dict = Body(...)):
        unknown = set(payload) - {"name"}
        if unknown:
            raise ApiError(400, "validation", f"not editable: {sorted(unknown)}")
        if "name" not in payload:
            raise ApiError(400, "validation", "name is required")
        portal.rename(payload["name"])
        return {"name": portal.config.name}

    async def _read_upload(file: UploadFile) -> bytes:
        data = await file.read(MAX_UPLOAD_BYTES + 1)
        if len(data) > MAX_UPLOAD_BYTES:
            raise ApiError(413, "too_large", f"uploads are limited to {MAX_UPLOAD_BYTES} bytes")
        try:
            with Image.open(io.BytesIO(data)) as img:
                img.verify()
        except Exception as exc:
            raise ApiError(400, "unreadable_asset", f"not a readable image: {exc}") from exc
        return data

    @app.put("/api/testbed/logo", dependencies=[admin])
    async def put_logo(file: UploadFile = File(...)):
        return {"path": portal.store_asset("logo", await _read_upload(file))}

    @app.put("/api/testbed/map", dependencies=[admin])
    async def put_map(file: UploadFile = File(...)):
        return {"path": portal.store_asset("map", await _read_upload(file))}

    def _serve_asset(rel: str) -> FileResponse:
        target = portal.dir / rel
        if not target.is_file():
            raise ApiError(404, "asset_missing", f"no such asset on disk: {rel}")
        return FileResponse(target)

    @app.get("/api/testbed/map")
    def get_map():
        return _serve_asset(portal.config.map_path)

    @app.get("/api/testbed/logo")
    def get_logo():
        return _serve_asset(portal.config.logo_path)

    ui_dir = Path(service.ui_dir) if service.ui_dir else None
    if ui_dir and ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return (
                "<!doctype html><title>portal api</title>"
                f"<h1>{portal.config.name}</h1>"
                "<p>No web UI is installed. The API lives under <code>/api</code>: "
                "<code>/api/testbed</code>, <code>/api/resources</code>, "
                "<code>/api/query</code>, <code>/api/events</code>.</p>"
            )

    return app


def _sse(payload: dict) -> str:
    return f"data: {canonical.dumps(payload)}\n\n"
