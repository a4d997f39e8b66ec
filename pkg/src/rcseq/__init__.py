"""Root-cause sequence analysis for multivariate KPI telemetry.

Given labeled normal/abnormal KPI panels (or the built-in synthetic fault
generator), the library identifies intervention-affected root-cause
candidates, builds the normal-state lagged causal subgraph linking them to
the SLA indicator, and orders the deviation events into a causal
intervention sequence. A Monte Carlo tuner selects the discovery
parameters and estimates per-KPI root-cause probabilities.
"""

__version__ = "0.1.0"

from .errors import AnalysisError, ConfigError, DataError, RcseqError

__all__ = [
    "AnalysisError",
    "ConfigError",
    "DataError",
    "RcseqError",
    "__version__",
]
