"""Flat stationary state, linear spectrum and nonlinear boundary evolution of a
two-dimensional periodic tumor layer growing on a substrate."""
from .core import (
    REFERENCE_PARAMS,
    BoundaryProfile,
    FourierCoeffs,
    ModelParameters,
    PeriodicGrid,
    StripField,
    from_fourier,
    to_fourier,
    validate,
)
from .stationary import FlatStationaryState, make_state, p_star, sigma_star, solve_rho_star

__version__ = "0.1.0"

__all__ = [
    "REFERENCE_PARAMS",
    "BoundaryProfile",
    "FlatStationaryState",
    "FourierCoeffs",
    "ModelParameters",
    "PeriodicGrid",
    "StripField",
    "from_fourier",
    "make_state",
    "p_star",
    "sigma_star",
    "solve_rho_star",
    "to_fourier",
    "validate",
]
