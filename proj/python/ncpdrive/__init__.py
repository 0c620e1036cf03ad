"""Liquid time-constant steering models."""

from ._core import (
    ConfigError,
    FormatError,
    Model,
    ShapeError,
    preprocess,
    run,
    synth,
    variants,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "Model",
    "ShapeError",
    "preprocess",
    "run",
    "synth",
    "variants",
]
