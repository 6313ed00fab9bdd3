from .manager import Subscription, TestbedManager, init_manager, policy_from_config
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
    classify_status,
    poll_resource,
)

__all__ = [
    "ChangeEvent",
    "DuplicateResource",
    "Location",
    "PollResult",
    "RefreshPolicy",
    "Snapshot",
    "Status",
    "Subscription",
    "TestbedManager",
    "UnknownResource",
    "applied",
    "classify_status",
    "init_manager",
    "policy_from_config",
    "poll_resource",
]
