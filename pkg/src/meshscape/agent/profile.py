"""Resource profile: the static description plus dynamic-state seeds for one agent."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

from .. import canonical


@dataclass
class ResourceProfile:
    hostname: str
    os_name: str = "Linux"
    os_version: str = "5.15"
    cpu_model: str = "Sim CPU"
    cpu_count: int = 4
    memory_total_mb: int = 8192
    fs_total_gb: float = 100.0
    fs_free_gb: float = 60.0
    net_interconnect: str = "GigE"
    country: str = ""
    load_one: float = 0.5
    load_five: float = 0.5
    load_fifteen: float = 0.5
    seed: int = 1

    def validate(self):
        problems = []
        if not self.hostname:
            problems.append("hostname must be non-empty")
        if self.cpu_count < 1:
            problems.append("cpu_count must be positive")
        if self.memory_total_mb < 1:
            problems.append("memory_total_mb must be positive")
        if self.fs_total_gb < 0 or self.fs_free_gb < 0:
            problems.append("filesystem sizes must be non-negative")
        if self.fs_free_gb > self.fs_total_gb:
            problems.append("fs_free_gb exceeds fs_total_gb")
        cap = 4 * self.cpu_count
        for name in ("load_one", "load_five", "load_fifteen"):
            v = getattr(self, name)
            if not 0 <= v <= cap:
                problems.append(f"{name} must lie in [0, {cap}]")
        if problems:
            raise ValueError("; ".join(problems))

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "ResourceProfile":
        fields = set(cls.__dataclass_fields__)
        unknown = set(doc) - fields
        if unknown:
            raise ValueError(f"unknown profile fields: {sorted(unknown)}")
        if "hostname" not in doc:
            raise ValueError("profile needs a hostname")
        profile = cls(**doc)
        profile.validate()
        return profile


def load_profile(path: str | Path) -> ResourceProfile:
    doc = canonical.loads(Path(path).read_text(encoding="utf-8"))
    return ResourceProfile.from_doc(doc)


def save_profile(profile: ResourceProfile, path: str | Path):
    profile.validate()
    Path(path).write_text(canonical.dumps_pretty(profile.to_doc()), encoding="utf-8")
