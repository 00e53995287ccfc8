"""Equilibria of repeated stochastic games and an online drift-plus-penalty game manager."""

from .dpp import (
    EngineConfig,
    TraceRecord,
    audit_greedy,
    extract_empirical_policy,
    run,
    run_batch,
    theorem_bounds,
)
from .errors import GameError
from .fairness import FairnessFunction, parse_fairness
from .game import GameSpec, fig1_game, random_game, validate_game
from .gamefile import dump_game, load_game_file, parse_game_file, parse_game_text
from .static import EquilibriumKind, certify, optimize_static, polytope_silhouette
from .stochastic import certify_stochastic, optimize_stochastic, virtual_static_game

__version__ = "0.1.0"

__all__ = [
    "EngineConfig",
    "EquilibriumKind",
    "FairnessFunction",
    "GameError",
    "GameSpec",
    "TraceRecord",
    "audit_greedy",
    "certify",
    "certify_stochastic",
    "dump_game",
    "extract_empirical_policy",
    "fig1_game",
    "load_game_file",
    "optimize_static",
    "optimize_stochastic",
    "parse_fairness",
    "parse_game_file",
    "parse_game_text",
    "polytope_silhouette",
    "random_game",
    "run",
    "run_batch",
    "theorem_bounds",
    "validate_game",
    "virtual_static_game",
]
