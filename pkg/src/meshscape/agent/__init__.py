"""Simulated resource hierarchy: information providers, per-resource agents, index server."""

from .collect import CATEGORIES, collect, root_dn, simulate_dynamics
from .giis import GiisRegistration, GiisRegistry, GiisServer, giis_search
from .gris import GrisAgent, GrisState, SearchFailed, serve_search
from .profile import ResourceProfile, load_profile, save_profile
from .rng import SplitMix64

__all__ = [
    "CATEGORIES", "GiisRegistration", "GiisRegistry", "GiisServer", "GrisAgent",
    "GrisState", "ResourceProfile", "SearchFailed", "SplitMix64", "collect",
    "giis_search", "load_profile", "root_dn", "save_profile", "serve_search",
    "simulate_dynamics",
]
