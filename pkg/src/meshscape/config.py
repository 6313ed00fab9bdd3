"""Persisted testbed definition: name, assets, refresh overrides, resource pins.

The on-disk format is the same canonical structured-text used everywhere else
(UTF-8, sorted keys, two-space indent), so re-saving an unchanged config is
byte-identical and hand edits survive round-trips.  Saves are atomic: write a
temporary sibling, fsync, rename over the original.
"""

from __future__ import annotations

import io
import json
import os
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path, PurePosixPath

from PIL import Image, ImageDraw

from . import canonical

FORMAT_VERSION = 1
CONFIG_FILENAME = "testbed.conf"
# conventional default port for a per-resource directory server
DEFAULT_DIRECTORY_PORT = 2135

__all__ = [
    "CONFIG_FILENAME",
    "ConfigParseError",
    "ConfigValidationError",
    "DEFAULT_DIRECTORY_PORT",
    "DirNotEmpty",
    "FORMAT_VERSION",
    "RefreshOverrides",
    "ResourcePin",
    "TestbedConfig",
    "UnreadableAsset",
    "UnsupportedVersion",
    "default_pin",
    "load_config",
    "save_config",
    "scaffold",
]


class ConfigParseError(ValueError):
    """The file is not well-formed structured text."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigValidationError(ValueError):
    """Well-formed but invalid; carries every field-level problem at once."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class UnsupportedVersion(ValueError):
    def __init__(self, version):
        super().__init__(f"unsupported format_version: {version!r}")
        self.version = version


class DirNotEmpty(Exception):
    pass


class UnreadableAsset(Exception):
    pass


def _is_safe_relative(path: str) -> bool:
    p = PurePosixPath(path)
    return bool(path) and not p.is_absolute() and ".." not in p.parts and "\\" not in path


@dataclass
class RefreshOverrides:
    """Sparse overrides of the polling policy; unset fields keep the defaults."""

    period_seconds: float | None = None
    per_resource_timeout_seconds: float | None = None
    staleness_factor: float | None = None
    max_parallel_polls: int | None = None

    def to_doc(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_doc(cls, doc: dict) -> "RefreshOverrides":
        _reject_unknown(doc, cls.__dataclass_fields__, "refresh")
        return cls(**doc)


@dataclass
class ResourcePin:
    """One resource as configured: identity, endpoint, map position."""

    id: str
    name: str
    address: str
    port: int
    x: float
    y: float
    country: str = ""

    def problems(self) -> list[str]:
        label = f"resource {self.id or '<missing id>'}"
        out = []
        if not isinstance(self.id, str) or not self.id:
            out.append(f"{label}: id must be a non-empty string")
        if not isinstance(self.name, str) or not self.name:
            out.append(f"{label}: name must be a non-empty string")
        if not isinstance(self.address, str) or not self.address:
            out.append(f"{label}: address must be a non-empty string")
        if not isinstance(self.port, int) or isinstance(self.port, bool) or not 1 <= self.port <= 65535:
            out.append(f"{label}: port must be an integer in [1, 65535]")
        for axis in ("x", "y"):
            v = getattr(self, axis)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0.0 <= float(v) <= 1.0:
                out.append(f"{label}: {axis} must lie in [0, 1]")
        if not isinstance(self.country, str):
            out.append(f"{label}: country must be a string")
        return out

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "ResourcePin":
        _reject_unknown(doc, cls.__dataclass_fields__, "resource")
        missing = {"id", "name", "address", "port", "x", "y"} - set(doc)
        if missing:
            raise ConfigValidationError([f"resource is missing fields: {sorted(missing)}"])
        doc = dict(doc)
        for axis in ("x", "y"):
            if isinstance(doc[axis], int) and not isinstance(doc[axis], bool):
                doc[axis] = float(doc[axis])
        return cls(**doc)


@dataclass
class TestbedConfig:
    name: str
    format_version: int = FORMAT_VERSION
    logo_path: str = "assets/logo.png"
    map_path: str = "assets/map.png"
    refresh: RefreshOverrides = field(default_factory=RefreshOverrides)
    resources: list[ResourcePin] = field(default_factory=list)

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.name, str) or not self.name:
            out.append("name must be a non-empty string")
        for label, path in (("logo_path", self.logo_path), ("map_path", self.map_path)):
            if not isinstance(path, str) or not _is_safe_relative(path):
                out.append(f"{label} must be a relative path without '..' segments: {path!r}")
        seen = set()
        for pin in self.resources:
            out.extend(pin.problems())
            if pin.id in seen:
                out.append(f"duplicate resource id: {pin.id}")
            seen.add(pin.id)
        ov = self.refresh
        if ov.period_seconds is not None and not ov.period_seconds > 0:
            out.append("refresh.period_seconds must be positive")
        if ov.per_resource_timeout_seconds is not None and not ov.per_resource_timeout_seconds > 0:
            out.append("refresh.per_resource_timeout_seconds must be positive")
        if ov.staleness_factor is not None and not ov.staleness_factor >= 1:
            out.append("refresh.staleness_factor must be at least 1")
        if ov.max_parallel_polls is not None and not ov.max_parallel_polls >= 1:
            out.append("refresh.max_parallel_polls must be at least 1")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigValidationError(problems)

    def pin(self, id: str) -> ResourcePin | None:
        return next((p for p in self.resources if p.id == id), None)

    def to_doc(self) -> dict:
        return {
            "format_version": self.format_version,
            "name": self.name,
            "logo_path": self.logo_path,
            "map_path": self.map_path,
            "refresh": self.refresh.to_doc(),
            "resources": [pin.to_doc() for pin in self.resources],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TestbedConfig":
        if not isinstance(doc, dict):
            raise ConfigValidationError(["top level must be an object"])
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise UnsupportedVersion(version)
        _reject_unknown(doc, cls.__dataclass_fields__, "config")
        if "name" not in doc:
            raise ConfigValidationError(["name is required"])
        refresh_doc = doc.get("refresh", {})
        resources_doc = doc.get("resources", [])
        if not isinstance(refresh_doc, dict):
            raise ConfigValidationError(["refresh must be an object"])
        if not isinstance(resources_doc, list) or not all(isinstance(r, dict) for r in resources_doc):
            raise ConfigValidationError(["resources must be a list of objects"])
        return cls(
            name=doc["name"],
            format_version=version,
            logo_path=doc.get("logo_path", "assets/logo.png"),
            map_path=doc.get("map_path", "assets/map.png"),
            refresh=RefreshOverrides.from_doc(refresh_doc),
            resources=[ResourcePin.from_doc(r) for r in resources_doc],
        )


def _reject_unknown(doc: dict, fields, where: str):
    unknown = set(doc) - set(fields)
    if unknown:
        raise ConfigValidationError([f"unknown {where} fields: {sorted(unknown)}"])


def load_config(path: str | Path) -> TestbedConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = canonical.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.lineno, exc.msg) from exc
    try:
        cfg = TestbedConfig.from_doc(doc)
    except TypeError as exc:  # wrong field types reaching the constructors
        raise ConfigValidationError([str(exc)]) from exc
    cfg.validate()
    return cfg


# File-operation seams, aliased so tests can inject faults at each step.
_fsync = os.fsync
_replace = os.replace

def save_config(path: str | Path, cfg: TestbedConfig):
    """Atomically persist: the file on disk is always a complete config."""
    cfg.validate()
    path = Path(path)
    data = canonical.dumps_pretty(cfg.to_doc()).encode("utf-8")
    tmp = path.with_name(f"{path.name}.tmp-{uuid.uuid4().hex[:8]}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            _fsync(fh.fileno())
        _replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def default_pin(x: float = 0.5, y: float = 0.5) -> ResourcePin:
    """A fresh pin with documented defaults, ready to add at (x, y)."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError("position components must lie in [0, 1]")
    return ResourcePin(
        id=f"r-{uuid.uuid4().hex[:12]}",
        name="New Resource",
        address="localhost",
        port=DEFAULT_DIRECTORY_PORT,
        x=float(x),
        y=float(y),
    )


def _default_map_image(width: int = 1024, height: int = 512) -> Image.Image:
    img = Image.new("RGB", (width, height), (23, 37, 54))
    draw = ImageDraw.Draw(img)
    for gx in range(0, width, 64):
        draw.line([(gx, 0), (gx, height)], fill=(35, 53, 75))
    for gy in range(0, height, 64):
        draw.line([(0, gy), (width, gy)], fill=(35, 53, 75))
    draw.rectangle([0, 0, width - 1, height - 1], outline=(90, 120, 150))
    return img


def _default_logo_image(name: str) -> Image.Image:
    img = Image.new("RGB", (360, 80), (23, 37, 54))
    draw = ImageDraw.Draw(img)
    draw.rectangle([0, 0, 359, 79], outline=(90, 120, 150))
    draw.text((12, 30), name, fill=(220, 230, 240))
    return img


def _load_asset(path: str | Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.copy()
    except (OSError, ValueError) as exc:
        raise UnreadableAsset(f"{path}: {exc}") from exc


_SCAFFOLD_README = """\
# {name}

A portal directory: serve it with

    meshscape serve .

Resources live in `{config}` (hand-editable; the server picks up saved
changes) or can be managed through the portal's edit mode.
"""


def scaffold(
    directory: str | Path,
    name: str,
    map_image: str | Path | None = None,
    logo_image: str | Path | None = None,
) -> list[Path]:
    """Create a blank, immediately servable portal directory.

    Provided asset files are copied in; omitted ones get generated defaults.
    All-or-nothing: on any failure nothing new is left behind.
    """
    directory = Path(directory)
    if directory.exists() and any(directory.iterdir()):
        raise DirNotEmpty(str(directory))
    # read inputs before creating anything so failures leave no residue
    map_img = _load_asset(map_image) if map_image is not None else _default_map_image()
    logo_img = _load_asset(logo_image) if logo_image is not None else _default_logo_image(name)
    cfg = TestbedConfig(name=name)
    cfg.validate()

    created: list[Path] = []
    made_directory = not directory.exists()
    try:
        directory.mkdir(parents=True, exist_ok=True)
        assets = directory / "assets"
        assets.mkdir()
        created.append(assets)
        for img, rel in ((map_img, cfg.map_path), (logo_img, cfg.logo_path)):
            target = directory / rel
            buffer = io.BytesIO()
            img.save(buffer, format="PNG")
            target.write_bytes(buffer.getvalue())
            created.append(target)
        save_config(directory / CONFIG_FILENAME, cfg)
        created.append(directory / CONFIG_FILENAME)
        readme = directory / "README.md"
        readme.write_text(_SCAFFOLD_README.format(name=name, config=CONFIG_FILENAME), encoding="utf-8")
        created.append(readme)
    except BaseException:
        for path in reversed(created):
            if path.is_file():
                path.unlink(missing_ok=True)
            elif path.is_dir():
                path.rmdir()
        if made_directory:
            directory.rmdir()
        raise
    return created
