"""Controllability of linear control systems: Kalman rank, Lie spans,
push-forward flows on extended space-time and constructive local steering."""
from ._backend import BACKEND
from .attainability import (
    AttainabilityCertificate,
    SteeringResult,
    TauGrid,
    choose_epsilon,
    compute_ell_max,
    f_epsilon,
    jacobian_rank_certificate,
    reconstruct_control,
    steer,
)
from .errors import (
    ControlOutOfSet,
    DimensionError,
    EpsilonSearchFailed,
    InternalError,
    KalmanFlowError,
    NewtonDivergence,
    NoConvergence,
    NotLocallyControllable,
    ParseError,
    ValidationError,
)
from .kalman import analyze, decompose
from .lie import kalman_lie_check, lie_span_at, linear_family
from .model import (
    ControlSet,
    ExtendedState,
    LinearSystem,
    PiecewiseConstantControl,
    load_system,
    membership,
    parse_control,
    parse_system,
    serialize_system,
)
from .numerics import exp_integral, mat_exp, numerical_rank
from .simulate import integrate_segment, sample_reachable, simulate_endpoint

__version__ = "0.1.0"
