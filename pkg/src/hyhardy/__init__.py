"""Hardy-Schrodinger operators on the Poincare ball.

Exact kernels and extremal profiles, radial quadrature, the conformal
reduction to a singular Euclidean problem, Rayleigh-quotient minimization,
and the mass of the operator with the associated existence threshold.
"""

from .errors import (
    BracketError,
    ConsistencyError,
    ConvergenceError,
    DegenerateInputError,
    DivergenceError,
    DomainError,
    HyHardyError,
    NonCoerciveError,
    ParameterError,
    PreconditionError,
    RegimeError,
    StiffnessError,
)
from .params import (
    Exponents,
    ProblemParams,
    Regime,
    RegimeKind,
    classify_regime,
    critical_exponent,
    exponents,
    hardy_constant,
    make_params,
    sphere_area,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BracketError",
    "ConsistencyError",
    "ConvergenceError",
    "DegenerateInputError",
    "DivergenceError",
    "DomainError",
    "HyHardyError",
    "NonCoerciveError",
    "ParameterError",
    "PreconditionError",
    "RegimeError",
    "StiffnessError",
    "Exponents",
    "ProblemParams",
    "Regime",
    "RegimeKind",
    "classify_regime",
    "critical_exponent",
    "exponents",
    "hardy_constant",
    "make_params",
    "sphere_area",
]
