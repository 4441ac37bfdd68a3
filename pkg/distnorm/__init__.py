"""
distnorm: distinguishability norms of restricted families of quantum measurements.

Computes, bounds and samples the norms ``||xi||_M`` induced by POVM families
(uniform, t-designs, local and PPT measurements on bipartite systems) and
the entropic relations that follow from them.
"""

from .config import DEFAULT_SETTINGS, Settings, get_settings, set_settings
from .designs import WeightedDesign, design_defect, mub_design, two_design_bound_check
from .errors import (
    AuditViolation,
    ConfigError,
    DimensionError,
    DistnormError,
    FileFormatError,
    SampleSizeError,
    UnsupportedDimensionError,
    ValidationError,
)
from .information import Ensemble, entropy, mc_accessible_info_lower
from .operators import HermitianOp, PureState, helstrom_bias, trace_norm
from .permutations import PermutationOracle, r_conjugacy_classes
from .povm import MeasurementFamily, Povm, TwoOutcomeTest, estimate_domination, validate_povm
from .report import Report
from .sampling import McEstimate, RandomStream
from .uniform import RankSplit, lambda_uniform, mc_uniform_bias

__version__ = "0.1.0"

__all__ = [
    "AuditViolation",
    "ConfigError",
    "DEFAULT_SETTINGS",
    "DimensionError",
    "DistnormError",
    "Ensemble",
    "FileFormatError",
    "HermitianOp",
    "McEstimate",
    "MeasurementFamily",
    "PermutationOracle",
    "Povm",
    "PureState",
    "RandomStream",
    "RankSplit",
    "Report",
    "SampleSizeError",
    "Settings",
    "TwoOutcomeTest",
    "UnsupportedDimensionError",
    "ValidationError",
    "WeightedDesign",
    "design_defect",
    "entropy",
    "estimate_domination",
    "get_settings",
    "helstrom_bias",
    "lambda_uniform",
    "mc_accessible_info_lower",
    "mc_uniform_bias",
    "mub_design",
    "r_conjugacy_classes",
    "set_settings",
    "trace_norm",
    "two_design_bound_check",
    "validate_povm",
]
