"""Non-locality measures for bipartite input-output behaviors.

Build behaviors from counts or from the two-qutrit model, then quantify
them with Bell parameters, L1 distance to the local polytope and the
asymptotic non-local capacity.
"""

__version__ = "0.1.0"

from .behavior import (
    BehaviorTable,
    CountsRecord,
    Dims,
    deterministic_behavior,
    l1_distance,
    mix,
    normalize_counts,
    pr_box,
    signaling_deficit,
    uniform_behavior,
)
from .bell import BellValue, fit_mixing_parameter, i2, i3
from .capacity import CapacityCertificate, build_v_polytope, channel_capacity, nonlocal_capacity_asym
from .estimators import (
    CountsNormalizer,
    MixingParameterRegressor,
    NonlocalityProfiler,
    NonSignalingProjector,
)
from .io import load_counts
from .pipeline import Interval, SweepConfig, bootstrap_uncertainty, run_sweep
from .polytope import (
    PolytopeResult,
    distance_to_local_polytope,
    enumerate_local_vertices,
    is_local,
    project_nonsignaling,
)
from .quantum import QutritModel, born_behavior, measurement_vector, qutrit_state

__all__ = [
    "BehaviorTable",
    "BellValue",
    "CapacityCertificate",
    "CountsNormalizer",
    "CountsRecord",
    "Dims",
    "Interval",
    "MixingParameterRegressor",
    "NonSignalingProjector",
    "NonlocalityProfiler",
    "PolytopeResult",
    "QutritModel",
    "SweepConfig",
    "born_behavior",
    "bootstrap_uncertainty",
    "build_v_polytope",
    "channel_capacity",
    "deterministic_behavior",
    "distance_to_local_polytope",
    "enumerate_local_vertices",
    "fit_mixing_parameter",
    "i2",
    "i3",
    "is_local",
    "l1_distance",
    "load_counts",
    "measurement_vector",
    "mix",
    "nonlocal_capacity_asym",
    "normalize_counts",
    "pr_box",
    "project_nonsignaling",
    "qutrit_state",
    "run_sweep",
    "signaling_deficit",
    "uniform_behavior",
]
