"""Correlation-matrix geometry and multi-asset Black-Scholes propagators.

The main entry points are re-exported here; see the submodules for the rest.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    KummerError,
    NumericError,
    PricingUndefinedError,
)
from .geometry import (
    CorrelationMatrix,
    CorrelationPoint,
    Region,
    RegionClassification,
    SpectralDecomposition,
    assemble_matrix,
    classify,
    closed3_sheet_eigenvalues,
    determinant_closed3,
    determinant_generic,
    gradient_eta,
    kummer_sheet_z,
    sample_level_surface,
    spectral_decompose,
)
from .payoffs import PayoffDescriptor
from .pricing import MonteCarlo, PriceResult, PricingRequest, Quadrature, price
from .propagator import build_degenerate, build_regular
from .transform import MarketParams, StateVector

__all__ = [
    "ConfigError", "DegenerateInputError", "DomainError", "KummerError", "NumericError",
    "PricingUndefinedError", "CorrelationMatrix", "CorrelationPoint", "Region",
    "RegionClassification", "SpectralDecomposition", "assemble_matrix", "classify",
    "closed3_sheet_eigenvalues", "determinant_closed3", "determinant_generic", "gradient_eta",
    "kummer_sheet_z", "sample_level_surface", "spectral_decompose", "PayoffDescriptor",
    "MonteCarlo", "PriceResult", "PricingRequest", "Quadrature", "price", "build_degenerate",
    "build_regular", "MarketParams", "StateVector",
]
