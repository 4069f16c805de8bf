"""Quantum optimal control gradients by adjoint, linear-response and Keldysh-contour routes."""

from .contour import Branch, ContourKernel, ContourTime, contour_kernel, contour_order, gradient_contour
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    GridError,
    HermiticityError,
    QOCTError,
    StateError,
    UnsupportedTargetError,
)
from .gradients import (
    GradientResult,
    ResponseKernel,
    Route,
    functional_derivative,
    gradient,
    gradient_adjoint,
    gradient_finite_difference,
    gradient_response,
    kubo_delta_a,
    propagator_derivative,
    response_kernel,
    response_kernel_matrix,
)
from .linalg import Operator, QuantumState, commutator, expectation, expm_hermitian
from .model import (
    ControlKind,
    ControlledSystem,
    ControlParameterization,
    Target,
    TargetKind,
    depsilon_du,
    epsilon,
    hamiltonian_at,
    merit,
)
from .optimizer import OptimizationConfig, OptimizationTrace, Status, maximize
from .propagation import (
    StepPropagatorCache,
    TimeGrid,
    Trajectory,
    build_step_propagators,
    propagate_costate_backward,
    propagate_costate_backward_inhomogeneous,
    propagate_forward,
    propagate_observable_backward,
)

__all__ = [
    "Branch",
    "ConfigError",
    "ContourKernel",
    "ContourTime",
    "ControlKind",
    "ControlParameterization",
    "ControlledSystem",
    "DimensionError",
    "DomainError",
    "GradientResult",
    "GridError",
    "HermiticityError",
    "Operator",
    "OptimizationConfig",
    "OptimizationTrace",
    "QOCTError",
    "QuantumState",
    "ResponseKernel",
    "Route",
    "StateError",
    "Status",
    "StepPropagatorCache",
    "Target",
    "TargetKind",
    "TimeGrid",
    "Trajectory",
    "UnsupportedTargetError",
    "build_step_propagators",
    "commutator",
    "contour_kernel",
    "contour_order",
    "depsilon_du",
    "epsilon",
    "expectation",
    "expm_hermitian",
    "functional_derivative",
    "gradient",
    "gradient_adjoint",
    "gradient_contour",
    "gradient_finite_difference",
    "gradient_response",
    "hamiltonian_at",
    "kubo_delta_a",
    "maximize",
    "merit",
    "propagate_costate_backward",
    "propagate_costate_backward_inhomogeneous",
    "propagate_forward",
    "propagate_observable_backward",
    "propagator_derivative",
    "response_kernel",
    "response_kernel_matrix",
]

__version__ = "0.1.0"
