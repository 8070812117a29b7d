"""Preference-based learning over discretized parameter spaces.

Models a latent utility from pairwise preferences, coactive suggestions,
and ordinal labels via a Laplace-approximated Gaussian-process posterior,
and selects new parameter combinations by Thompson sampling (regret
minimization) or information gain restricted to a region of interest
(preference characterization).
"""

from .actions import Action, ActionSet, ActionSpace, DimensionSpec, action_at, build_space, index_of, snap_to_grid
from .feedback import (
    CoactiveRecord,
    FeedbackDataset,
    Link,
    NoiseParams,
    OrdinalRecord,
    OrdinalScale,
    PreferenceRecord,
)
from .posterior import KernelConfig, PosteriorModel, SolverConfig, Subset, update_posterior
from .sampling import Buffer, SamplerConfig
from .synthetic import BenchmarkFunction, SyntheticOracle, eval_benchmark
from .engine import MetricsReport, QueryBundle, SessionConfig, SessionState, run_simulation, start_session

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionSet",
    "ActionSpace",
    "BenchmarkFunction",
    "Buffer",
    "CoactiveRecord",
    "DimensionSpec",
    "FeedbackDataset",
    "KernelConfig",
    "Link",
    "MetricsReport",
    "NoiseParams",
    "OrdinalRecord",
    "OrdinalScale",
    "PosteriorModel",
    "PreferenceRecord",
    "QueryBundle",
    "SamplerConfig",
    "SessionConfig",
    "SessionState",
    "SolverConfig",
    "Subset",
    "SyntheticOracle",
    "action_at",
    "build_space",
    "eval_benchmark",
    "index_of",
    "run_simulation",
    "snap_to_grid",
    "start_session",
    "update_posterior",
]
