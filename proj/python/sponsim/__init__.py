"""Deterministic sponsored-search simulator."""

from ._sponsim import (
    ConfigError,
    Error,
    MalformedRecord,
    ShapeViolation,
    auction,
    check_shapes,
    detect_scripted,
    gfp_dynamics,
    relative_ctr,
    replay_tables,
    run_config_file,
    run_config_text,
    tables_report,
)

__all__ = [
    "ConfigError",
    "Error",
    "MalformedRecord",
    "ShapeViolation",
    "auction",
    "check_shapes",
    "detect_scripted",
    "gfp_dynamics",
    "relative_ctr",
    "replay_tables",
    "run_config_file",
    "run_config_text",
    "tables_report",
]
