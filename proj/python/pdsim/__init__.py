"""District-level PDS wheat flow simulator."""

from ._core import (
    InvalidArgument,
    ParseError,
    PdsimError,
    Trace,
    UnknownDistrict,
    ValidationFailed,
    allocate,
    baseline_undernourished,
    compare_series,
    estimate_rations,
    fit_undernourishment_line,
    market_split,
    scale_production,
    simulate,
    validate,
    weekly_demand,
)

__all__ = [
    "InvalidArgument",
    "ParseError",
    "PdsimError",
    "Trace",
    "UnknownDistrict",
    "ValidationFailed",
    "allocate",
    "baseline_undernourished",
    "compare_series",
    "estimate_rations",
    "fit_undernourishment_line",
    "market_split",
    "scale_production",
    "simulate",
    "validate",
    "weekly_demand",
]
