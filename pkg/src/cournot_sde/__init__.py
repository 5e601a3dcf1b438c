"""Stochastic stability of a Cournot duopoly with hyperbolic inverse demand."""

from .core_model import (
    CharacteristicRoots,
    GameParams,
    LinearSystem,
    NoiseWiring,
    StationaryState,
    characteristic_roots,
    linearize,
    stationary_state,
)
from .errors import CournotSdeError, InvalidParams, NumericalFailure

__version__ = "0.1.0"

__all__ = [
    "CharacteristicRoots",
    "CournotSdeError",
    "GameParams",
    "InvalidParams",
    "LinearSystem",
    "NoiseWiring",
    "NumericalFailure",
    "StationaryState",
    "characteristic_roots",
    "linearize",
    "stationary_state",
]
