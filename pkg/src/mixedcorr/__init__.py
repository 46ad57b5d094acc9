"""Latent correlation estimation for mixed continuous/binary/ternary/
zero-inflated data via the latent Gaussian copula model.

The estimator runs in three steps: pairwise Kendall's tau, a type-specific
bridge function connecting its expectation to the latent correlation, and
inversion of that bridge -- either exactly by root-finding or through
precompiled interpolation grids.
"""

__version__ = "0.1.0"

from .bridge import (BridgeSpec, bridge_mc, bridge_value, make_bridge_spec,
                     tau_bound)
from .errors import (DataError, DomainError, GridError, MixedCorrError,
                     NumericError)
from .inversion import invert_approx, invert_original, rescale_tau
from .kendall import TauEstimate, kendall_tau, kendall_tau_matrix
from .model import (DataMatrix, PairClass, ThresholdParams, VariableKind,
                    classify_pair, detect_types, estimate_thresholds)
from .mvnorm import phi, phi2, phi3, phi4, phi_inv
from .pipeline import (EstimateConfig, LatentMatrixResult, SyntheticSpec,
                       estimate_latent_correlation, estimate_matrix, generate,
                       pearson_matrix)

__all__ = [
    "__version__",
    "BridgeSpec", "bridge_mc", "bridge_value", "make_bridge_spec", "tau_bound",
    "DataError", "DomainError", "GridError", "MixedCorrError", "NumericError",
    "invert_approx", "invert_original", "rescale_tau",
    "TauEstimate", "kendall_tau", "kendall_tau_matrix",
    "DataMatrix", "PairClass", "ThresholdParams", "VariableKind",
    "classify_pair", "detect_types", "estimate_thresholds",
    "phi", "phi2", "phi3", "phi4", "phi_inv",
    "EstimateConfig", "LatentMatrixResult", "SyntheticSpec",
    "estimate_latent_correlation", "estimate_matrix", "generate",
    "pearson_matrix",
]
