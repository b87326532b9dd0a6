"""Geodesics near cusp singularities.

Numerical study of the rescaled geodesic flow of model cusp metrics
``(1 - k(k-1) r^(2k-2) S) dr^2 + r^(2k) C dphi^2``: boundary dynamics,
critical-point and eigenvalue analysis, unstable-manifold shooting, and the
exponential map based at the singularity.
"""

from ._backend import backend_name
from .analysis import (
    BarrierReport,
    ConstantS,
    CriticalPoint,
    EigenData,
    check_barrier,
    convexity_bound,
    eigen_data,
    find_critical_points,
    resonance_relations,
)
from .dynamics import (
    BoundaryState,
    PhasePoint,
    Trajectory,
    boundary_energy,
    boundary_field,
    energy,
    integrate,
    rescaled_field,
    shell_point,
)
from .errors import ConfigError, DegenerateCriticalPointError, DomainError, PreconditionError
from .expmap import (
    ExpAtlas,
    InjectivityReport,
    backward_start_check,
    build_atlas,
    classify_heteroclinic,
    exp_eval,
    injectivity_report,
    shoot_unstable,
    surjectivity_report,
)
from .fourier import BoundaryFunction
from .metric import (
    CuspMetric,
    EmbeddedBoundaryCurve,
    eval_s,
    make_model_metric,
    metric_from_boundary_curve,
    metric_tensor,
)
from .oracle import (
    DirectGeodesicState,
    christoffel_fd,
    compare_trajectories,
    integrate_geodesic_direct,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierReport",
    "BoundaryFunction",
    "BoundaryState",
    "ConfigError",
    "ConstantS",
    "CriticalPoint",
    "CuspMetric",
    "DegenerateCriticalPointError",
    "DirectGeodesicState",
    "DomainError",
    "EigenData",
    "EmbeddedBoundaryCurve",
    "ExpAtlas",
    "InjectivityReport",
    "PhasePoint",
    "PreconditionError",
    "Trajectory",
    "backend_name",
    "backward_start_check",
    "boundary_energy",
    "boundary_field",
    "build_atlas",
    "check_barrier",
    "classify_heteroclinic",
    "compare_trajectories",
    "convexity_bound",
    "christoffel_fd",
    "eigen_data",
    "energy",
    "eval_s",
    "exp_eval",
    "find_critical_points",
    "injectivity_report",
    "integrate",
    "integrate_geodesic_direct",
    "make_model_metric",
    "metric_from_boundary_curve",
    "metric_tensor",
    "rescaled_field",
    "resonance_relations",
    "shell_point",
    "shoot_unstable",
    "surjectivity_report",
]
