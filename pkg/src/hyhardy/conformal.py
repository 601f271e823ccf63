"""Conformal reduction of the ball problem to a Euclidean singular problem.

With ``phi = (2/(1 - r^2))^{(n-2)/2}`` and ``v = phi u``,

    -Delta_B u - gamma V_2 u - lam u = V_p u^{p-1}
    <=>  -Delta v - (gamma/r^2 + h) v = b v^{p-1} / r^s,

where ``h = gamma a + (4 lam - n(n-2))/(1 - r^2)^2``,
``a = (2/(1 - r^2))^2 V_2 - 1/r^2`` and ``b = V_p r^s (2/(1 - r^2))^s``.
Writing ``S = (n-2) r^{n-2} G`` gives the cancellation-free forms

    a = (P - S)(P + S) / (S^2 r^2),   P = (1 - r^2)^{n-2},
    b = 2^{s-2} (n-2)^{(p-2)/2} (1 - r^2)^{2n-2-s} S^{-(p+2)/2},

which are used for all evaluations.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import DomainError, PreconditionError
from .params import ProblemParams, classify_regime, hyperbolic_theta
from .radial import Geometry, RadialFunction, RadialGrid

__all__ = [
    "EuclideanProblem",
    "conformal_phi",
    "conformal_phi_derivative",
    "push_forward",
    "pull_back",
    "expanded_V2_euclidean",
    "perturbation_a",
    "potential_h",
    "weight_b",
    "b0_derived",
    "b0_published_constant",
    "b0_limit",
    "build_euclidean_problem",
    "euclidean_residual",
]


def _radius(r, upper_open=True):
    arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr >= 1):
        raise DomainError("radius must lie in [0, 1)")
    return arr


def conformal_phi(n, r):
    """``phi(r) = (2/(1 - r^2))^{(n-2)/2}``, with ``phi(0) = 2^{(n-2)/2}``."""
    r = _radius(r)
    out = (2.0 / (1.0 - r * r)) ** ((n - 2) / 2.0)
    return float(out) if out.ndim == 0 else out


def conformal_phi_derivative(n, r):
    r = np.asarray(r, dtype=float)
    return conformal_phi(n, r) * (n - 2) * r / (1.0 - r * r)


def _euclidean_grid(grid):
    return RadialGrid(Geometry.EUCLIDEAN, grid.n, grid.nodes, grid.r_max, grid.scheme, grid.ratio)


def _hyperbolic_grid(grid):
    return RadialGrid(Geometry.HYPERBOLIC, grid.n, grid.nodes, grid.r_max, grid.scheme, grid.ratio)


def _multiply(u, grid, sign):
    n = u.n
    nodes = grid.nodes
    inside = nodes < 1.0
    phi = np.ones_like(nodes)
    phi[inside] = conformal_phi(n, nodes[inside])
    if sign > 0:
        values = u.values * phi

        def func(r):
            return u(r) * conformal_phi(n, r)

        def dfunc(r):
            return u.deriv(r) * conformal_phi(n, r) + u(r) * conformal_phi_derivative(n, r)
    else:
        values = u.values / phi

        def func(r):
            return u(r) / conformal_phi(n, r)

        def dfunc(r):
            ph = conformal_phi(n, r)
            return u.deriv(r) / ph - u(r) * conformal_phi_derivative(n, r) / (ph * ph)

    if u.piecewise_linear:
        return RadialFunction(grid, values, dirichlet=u.dirichlet)
    return RadialFunction(grid, values, None, func, dfunc, u.dirichlet, u.support)


def push_forward(u):
    """``v = phi u`` on the Euclidean copy of the grid (requires ``r_max < 1``)."""
    if u.grid.geometry is not Geometry.HYPERBOLIC:
        raise PreconditionError("push_forward expects a hyperbolic radial function")
    if u.grid.r_max >= 1:
        raise PreconditionError("push_forward needs a ball of Euclidean radius < 1")
    return _multiply(u, _euclidean_grid(u.grid), +1)


def pull_back(v):
    """``u = v / phi`` on the hyperbolic copy of the grid."""
    if v.grid.geometry is not Geometry.EUCLIDEAN:
        raise PreconditionError("pull_back expects a Euclidean radial function")
    if v.grid.r_max >= 1:
        raise PreconditionError("pull_back needs a ball of Euclidean radius < 1")
    return _multiply(v, _hyperbolic_grid(v.grid), -1)


def _a_times_r2(n, r):
    """``r^2 a(r)``, finite on ``[0, 1)``."""
    r = np.asarray(r, dtype=float)
    flat = np.atleast_1d(r)
    out = np.empty_like(flat)
    P = (1.0 - flat * flat) ** (n - 2)
    S = kernels.green_scaled(n, flat)
    low = flat <= kernels.SERIES_SWITCH
    out[low] = kernels.green_defect(n, flat[low]) * (P[low] + S[low]) / S[low] ** 2
    high = ~low
    out[high] = (P[high] / S[high]) ** 2 - 1.0
    return out.reshape(r.shape)


@functools.lru_cache(maxsize=None)
def _scalar_tables(n):
    coeff, shift = kernels._closed_terms(n)
    boundary = kernels._boundary_coefficients(n)
    return [float(c) for c in coeff], [int(e) for e in shift], [float(c) for c in boundary[::-1]]


def _a_times_r2_scalar(n, r):
    """Pure-float version of :func:`_a_times_r2` for ODE right-hand sides."""
    coeff, shift, boundary_rev = _scalar_tables(n)
    P = (1.0 - r * r) ** (n - 2)
    if r <= kernels.SERIES_SWITCH:
        rn = r ** (n - 2)
        logr = math.log(r)
        scaled = 0.0
        defect = 0.0
        for k, (c, e) in enumerate(zip(coeff, shift)):
            if e == 0:
                scaled -= c * logr * rn
                defect += c * rn * (1.0 + (n - 2) * logr)
            else:
                scaled += c * (rn - r ** (2 * k)) / e
                if k == 0:
                    defect -= (n - 2) * rn * c / e
                else:
                    defect += c * (2 * k * r ** (2 * k) - (n - 2) * rn) / e
        S = (n - 2) * scaled
        return defect * (P + S) / (S * S)
    d = 1.0 - r
    poly = 0.0
    for c in boundary_rev:
        poly = poly * d + c
    S = (n - 2) * r ** (n - 2) * poly * d ** (n - 1)
    return (P / S) ** 2 - 1.0


def expanded_V2_euclidean(n, r):
    """``(2/(1 - r^2))^2 V_2(r) = (1 - r^2)^{2(n-2)} / (r^2 S^2)``."""
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("expanded_V2_euclidean requires 0 < r < 1")
    out = ((1.0 - r * r) ** (n - 2) / kernels.green_scaled(n, r)) ** 2 / (r * r)
    return float(out) if out.ndim == 0 else out


def perturbation_a(n, r):
    """``a(r) = (2/(1-r^2))^2 V_2(r) - 1/r^2``."""
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("perturbation_a requires 0 < r < 1")
    out = _a_times_r2(n, r) / (r * r)
    return float(out) if out.ndim == 0 else out


def potential_h(params, r):
    """``h = gamma a + (4 lam - n(n-2)) / (1 - r^2)^2``."""
    n = params.n
    r = np.asarray(r, dtype=float)
    out = params.gamma * perturbation_a(n, r) + (4.0 * params.lam - n * (n - 2)) / (1.0 - r * r) ** 2
    return float(out) if out.ndim == 0 else out


def weight_b(params, r):
    """``b(r) = V_p(r) r^s (2/(1-r^2))^s`` with ``p = 2*(s)``, continuous at 0."""
    n, s, p = params.n, params.s, params.p
    r = _radius(r)
    S = kernels.green_scaled(n, r)
    out = (
        2.0 ** (s - 2.0)
        * (n - 2) ** ((p - 2.0) / 2.0)
        * (1.0 - r * r) ** (2 * n - 2 - s)
        * S ** (-(p + 2.0) / 2.0)
    )
    return float(out) if np.ndim(out) == 0 else out


def b0_derived(params):
    """Closed form of ``b(0)``: ``(n-2)^{(2-s)/(n-2)} 2^{s-2}``."""
    n, s = params.n, params.s
    return (n - 2) ** ((2.0 - s) / (n - 2)) * 2.0 ** (s - 2.0)


def b0_published_constant(params):
    """The published normalisation ``(n-2)^{(n-s)/(n-2)} 2^{s-2}``."""
    n, s = params.n, params.s
    return (n - 2) ** ((n - s) / (n - 2)) * 2.0 ** (s - 2.0)


@dataclass(frozen=True)
class B0Report:
    numeric_limit: float
    closed_form: float
    published: float
    ratio_published_to_numeric: float
    matches: str


def b0_limit(params, r_start=1e-3):
    """Limit of ``b`` at the origin from the raw definition ``V_p r^s phi^{2s/(n-2)}``.

    The raw formula is evaluated at ``r_start / 2^k`` and extrapolated with
    two Richardson steps (first-order correction for n = 3, second order
    otherwise), then compared with both closed forms.
    """
    n, s, p = params.n, params.s, params.p
    rs = r_start / 2.0 ** np.arange(4)
    raw = np.exp(kernels.log_weight_V_p(n, p, rs)) * rs ** s * (2.0 / (1.0 - rs * rs)) ** s
    order = 1 if n == 3 else 2
    level = raw
    for k in range(2):
        fac = 2.0 ** (order + k)
        level = (fac * level[1:] - level[:-1]) / (fac - 1.0)
    numeric = float(level[-1])
    derived, published = b0_derived(params), b0_published_constant(params)
    if abs(numeric / derived - 1) < 1e-6:
        verdict = "derived"
    elif abs(numeric / published - 1) < 1e-6:
        verdict = "published"
    else:
        verdict = "neither"
    return B0Report(numeric, derived, published, published / numeric, verdict)


@dataclass(frozen=True)
class EuclideanProblem:
    """Radial Euclidean problem ``-Delta v - (gamma/r^2 + h) v = b v^{p-1}/r^s`` on ``B_R``.

    ``lead`` and ``sub`` describe the singular head of ``h`` at the origin:
    ``h ~ lead * r^-theta`` for power type and
    ``h ~ lead * log(1/r) + sub`` for log type.  ``h = None`` means ``h = 0``.
    """

    params: ProblemParams
    R: float
    h: Callable | None = None
    b: Callable | None = None
    theta: float = 0.0
    log_type: bool = False
    lead: float = 0.0
    sub: float = 0.0
    b0: float = 1.0
    origin: str = "euclidean"
    extra: dict = field(default_factory=dict)
    r2h: Callable | None = None

    def __post_init__(self):
        if not self.R > 0:
            raise PreconditionError("domain radius must be positive")
        if not 0 <= self.theta < 2:
            raise PreconditionError("theta must lie in [0, 2)")

    def h_eval(self, r):
        r = np.asarray(r, dtype=float)
        return np.zeros_like(r) if self.h is None else np.asarray(self.h(r), dtype=float)

    def b_eval(self, r):
        r = np.asarray(r, dtype=float)
        return np.ones_like(r) if self.b is None else np.asarray(self.b(r), dtype=float)

    @property
    def regime(self):
        return classify_regime(self.params.replace(theta=self.theta), log_type=self.log_type)

    def with_h(self, h, lead=None, sub=None):
        """Same problem with a different potential (singular head kept unless given)."""
        return EuclideanProblem(
            self.params, self.R, h, self.b, self.theta, self.log_type,
            self.lead if lead is None else lead, self.sub if sub is None else sub,
            self.b0, self.origin, dict(self.extra), None,
        )

    @classmethod
    def unperturbed(cls, params, R):
        return cls(params, float(R))

    @classmethod
    def power(cls, params, R, coefficient, theta):
        """``h = coefficient * r^-theta`` and ``b = 1``."""
        c, th = float(coefficient), float(theta)

        def h(r):
            return c * np.asarray(r, dtype=float) ** (-th)

        return cls(params.replace(theta=th), float(R), h, None, th, False, c)


def _origin_data(params):
    """Singular head of ``h`` and its classification at the origin."""
    n, gamma, lam = params.n, params.gamma, params.lam
    theta, log_type = hyperbolic_theta(n)
    if n == 3:
        return theta, log_type, 4.0 * gamma, 0.0
    if n == 4:
        return theta, log_type, 8.0 * gamma, -4.0 * gamma + 4.0 * lam - 8.0
    h0 = gamma * 4.0 * (n - 2) / (n - 4) + 4.0 * lam - n * (n - 2)
    return theta, log_type, h0, 0.0


def build_euclidean_problem(params, hyperbolic_ball_radius):
    """Euclidean problem equivalent to the ball problem on ``B_R`` (``R < 1``)."""
    R = float(hyperbolic_ball_radius)
    if not 0 < R < 1:
        raise PreconditionError("the hyperbolic ball needs Euclidean radius in (0, 1)")
    theta, log_type, lead, sub = _origin_data(params)

    def h(r):
        return potential_h(params, r)

    def b(r):
        return weight_b(params, r)

    n, gamma = params.n, params.gamma
    lin = 4.0 * params.lam - n * (n - 2)

    def r2h(r):
        return gamma * _a_times_r2_scalar(n, r) + lin * r * r / (1.0 - r * r) ** 2

    return EuclideanProblem(
        params.replace(theta=theta), R, h, b, theta, log_type, lead, sub,
        b0_derived(params), "hyperbolic", {}, r2h,
    )


def euclidean_residual(problem, v, dv, d2v, r, multiplier=1.0):
    """Scaled residual of ``-v'' - (n-1)v'/r - (gamma/r^2 + h) v - mult b v^{p-1}/r^s``."""
    params = problem.params
    n, gamma, s, p = params.n, params.gamma, params.s, params.p
    r = np.asarray(r, dtype=float)
    terms = [
        -d2v,
        -(n - 1) * dv / r,
        -gamma * v / (r * r),
        -problem.h_eval(r) * v,
        -multiplier * problem.b_eval(r) * np.abs(v) ** (p - 1) / r ** s,
    ]
    total = sum(terms)
    return total / np.maximum(sum(np.abs(t) for t in terms), 1e-300)
