"""Robust M-estimators of location on constant-curvature spaces.

Existence and uniqueness certificates for sample M-estimators on the sphere,
hyperbolic space and Euclidean space, with solvers and verification suites.
"""

from .certify import (
    BallEstimate,
    Certificate,
    ProbeParams,
    build_certificate,
    check_collinearity,
    counterexample,
    hessian_comparison_check,
    minimal_enclosing_ball,
    r0,
)
from .exceptions import (
    ClassificationError,
    CutLocusError,
    DegenerateWeightsError,
    DomainError,
    NotCoverableError,
    RMestError,
    UnsupportedLossError,
    ValidationError,
)
from .geometry import Euclidean, Hyperbolic, ManifoldSpace, Sphere, make_space, parse_space, sn_delta
from .losses import (
    Absolute,
    Andrews,
    Huber,
    LogCosh,
    Loss,
    LossClass,
    Lp,
    PseudoHuber,
    SoftplusSquare,
    Tukey,
    Welsch,
    bundled_losses,
    classify,
    lemma2_gap,
    parse_loss,
)
from .objective import (
    ObjectiveValue,
    WeightedSample,
    evaluate,
    riemannian_gradient,
    risk,
    second_derivative_along,
)
from .solver import (
    EstimateResult,
    MultiStartResult,
    SolverParams,
    minimize_irls,
    minimize_rgd,
    multi_start,
)

__version__ = "0.1.0"
