"""Relative survival spatial general hazard models."""

from ._core import (
    ConfigError,
    DomainError,
    Run,
    cum_hazard,
    density,
    fit,
    hazard,
    log_survival,
    psis_loo,
    quantile,
    simulate,
    survival_quantile,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Run",
    "cum_hazard",
    "density",
    "fit",
    "hazard",
    "log_survival",
    "psis_loo",
    "quantile",
    "simulate",
    "survival_quantile",
]
