"""Problem parameters, exponent algebra and regime classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ParameterError

__all__ = [
    "ProblemParams",
    "Exponents",
    "RegimeKind",
    "Regime",
    "make_params",
    "exponents",
    "classify_regime",
    "critical_exponent",
    "hardy_constant",
    "hyperbolic_theta",
    "sphere_area",
]


def hardy_constant(n):
    """Best Hardy constant ``(n - 2)**2 / 4``."""
    return (n - 2) ** 2 / 4.0


def critical_exponent(n, s):
    """Hardy-Sobolev critical exponent ``2(n - s)/(n - 2)``."""
    return 2.0 * (n - s) / (n - 2)


def sphere_area(n):
    """Surface area of the unit sphere in R^n (``omega_{n-1}``)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class ProblemParams:
    """Validated parameters ``(n, gamma, s, lam, theta)``.

    ``lam`` is the coefficient of the linear perturbation and ``theta`` the
    singularity order of the Euclidean perturbation ``h ~ |x|**-theta``.
    Construction validates the invariants; invalid input raises
    :class:`~hyhardy.errors.ParameterError`.
    """

    n: int
    gamma: float
    s: float = 0.0
    lam: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        n = self.n
        if isinstance(n, bool) or not float(n).is_integer():
            raise ParameterError("dimension", f"dimension must be an integer, got {n!r}")
        n = int(n)
        object.__setattr__(self, "n", n)
        for name in ("gamma", "s", "lam", "theta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(
                    "gamma" if name in ("gamma", "lam") else name,
                    f"{name} must be finite, got {value!r}",
                )
            object.__setattr__(self, name, value)
        if n < 3:
            raise ParameterError("dimension", f"dimension must be >= 3, got {n}")
        if self.gamma >= hardy_constant(n):
            raise ParameterError(
                "gamma",
                f"gamma={self.gamma} must be < (n-2)^2/4 = {hardy_constant(n)}",
            )
        if not 0.0 <= self.s < 2.0:
            raise ParameterError("s", f"s={self.s} must lie in [0, 2)")
        if not 0.0 <= self.theta < 2.0:
            raise ParameterError("theta", f"theta={self.theta} must lie in [0, 2)")

    @property
    def p(self):
        """Critical exponent ``2*(s)``."""
        return critical_exponent(self.n, self.s)

    def replace(self, **changes):
        fields = dict(n=self.n, gamma=self.gamma, s=self.s, lam=self.lam, theta=self.theta)
        fields.update(changes)
        return ProblemParams(**fields)


def make_params(n, gamma, s=0.0, lam=0.0, theta=0.0):
    """Validate raw inputs and return a :class:`ProblemParams`."""
    return ProblemParams(n=n, gamma=gamma, s=s, lam=lam, theta=theta)


@dataclass(frozen=True)
class Exponents:
    beta_plus: float
    beta_minus: float
    alpha_plus: float
    alpha_minus: float
    two_star_s: float
    gamma_H: float

    @property
    def gap(self):
        """``beta_plus - beta_minus``, the exponent of the mass term."""
        return self.beta_plus - self.beta_minus


def exponents(params):
    """Radial exponents of the Hardy operator for ``params``.

    ``beta_minus`` is computed as ``gamma / beta_plus`` so that it stays
    accurate when ``gamma`` is tiny.
    """
    n = params.n
    half = (n - 2) / 2.0
    root = math.sqrt(hardy_constant(n) - params.gamma)
    beta_plus = half + root
    beta_minus = params.gamma / beta_plus
    return Exponents(
        beta_plus=beta_plus,
        beta_minus=beta_minus,
        alpha_plus=beta_plus / (n - 2),
        alpha_minus=beta_minus / (n - 2),
        two_star_s=critical_exponent(n, params.s),
        gamma_H=hardy_constant(n),
    )


class RegimeKind(enum.Enum):
    HIGH_DIM = "HighDim"
    LOW_DIM_MASS_NEEDED = "LowDimMassNeeded"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    threshold_lambda: float | None = None
    gamma_split: float = 0.0
    log_type: bool = False

    @property
    def needs_mass(self):
        return self.kind is RegimeKind.LOW_DIM_MASS_NEEDED


def hyperbolic_theta(n):
    """Singularity order of the conformally transformed perturbation.

    Returns ``(theta, log_type)``: ``(1, False)`` for n = 3, ``(0, True)`` for
    n = 4 (logarithmic singularity) and ``(0, False)`` for n >= 5.
    """
    if n == 3:
        return 1.0, False
    if n == 4:
        return 0.0, True
    return 0.0, False


def classify_regime(params, log_type=False):
    """Decide whether existence follows from dimension or needs a positive mass.

    The split value is ``(n-2)^2/4 - (2-theta)^2/4``.  A logarithmic
    perturbation behaves like ``theta = 0`` for this purpose but can never
    use the high-dimensional test functions at ``gamma > 0``.  Negative
    ``gamma`` is outside the existence theorems and reported as infeasible.
    For n >= 5 with ``theta = 0`` the high-dimensional regime also carries
    the explicit lower bound on ``lam``.
    """
    n, gamma, theta = params.n, params.gamma, params.theta
    if log_type:
        theta = 0.0
    split = hardy_constant(n) - (2.0 - theta) ** 2 / 4.0
    if gamma < 0:
        return Regime(RegimeKind.INFEASIBLE, None, split, log_type)
    if gamma > split or (log_type and gamma > 0):
        return Regime(RegimeKind.LOW_DIM_MASS_NEEDED, None, split, log_type)
    threshold = None
    if n >= 5 and theta == 0.0 and not log_type:
        threshold = (n - 2) / (n - 4) * (n * (n - 4) / 4.0 - gamma)
    return Regime(RegimeKind.HIGH_DIM, threshold, split, log_type)
