"""STL robustness monitoring, covering arrays and falsification of driving scenarios."""

from .covering import CoveringArray, MixedStrengthSpec, ParameterDomain, generate_ca, verify_coverage
from .monitor import MonitorResult, boolean_satisfaction, monitor, robustness, robustness_series, worst_time
from .optimize import SAConfig, SearchSpace, ca_then_falsify, falsify_sa, uniform_random_search
from .stl import ParseError, format_formula, parse_formula
from .trace import SignalSpace, Trace, signed_distance, validate_trace

__version__ = "0.1.0"

__all__ = [
    "CoveringArray",
    "MixedStrengthSpec",
    "MonitorResult",
    "ParameterDomain",
    "ParseError",
    "SAConfig",
    "SearchSpace",
    "SignalSpace",
    "Trace",
    "boolean_satisfaction",
    "ca_then_falsify",
    "falsify_sa",
    "format_formula",
    "generate_ca",
    "monitor",
    "parse_formula",
    "robustness",
    "robustness_series",
    "signed_distance",
    "uniform_random_search",
    "validate_trace",
    "verify_coverage",
    "worst_time",
]
