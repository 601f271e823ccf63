"""Mass of the radial Hardy-Schrodinger operator by dual shooting.

The singular solutions ``K_pm ~ r^{-beta_pm}`` of

    K'' + (n-1) K'/r + (gamma/r^2 + h) K = 0

are written ``K = r^{-beta} (1 + z(t))`` with ``t = log r``, which gives

    z'' + (n - 2 - 2 beta) z' + e^{2t} h(e^t) (1 + z) = 0.

Both are started at ``r0`` from a one-term Frobenius series and integrated
outwards.  The Dirichlet combination ``K_+ + m K_-`` vanishing at ``R``
defines the mass ``m = -K_+(R)/K_-(R)``.

Why this is accurate: an initialization error in ``K_+`` is, to leading
order, a multiple ``delta`` of ``K_-`` and shifts ``m`` by exactly ``delta``.
The first neglected Frobenius term contributes
``delta ~ r0^{kappa - (beta_+ - beta_-)}`` with ``kappa`` the order of the
next correction; it vanishes as ``r0 -> 0`` exactly when the mass is
defined (``beta_+ - beta_- < 2 - theta``).  Halving ``r0`` therefore
measures the remaining error, and every report carries that diagnostic.
Integrating ``z`` rather than ``K`` keeps relative precision in the tiny
correction near ``r0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import conformal, kernels
from .errors import (
    BracketError,
    ConvergenceError,
    NonCoerciveError,
    PreconditionError,
    RegimeError,
    StiffnessError,
)
from .params import exponents, hardy_constant
from .radial import Geometry, RadialFunction, geometric_grid

__all__ = [
    "ShootingConfig",
    "MassReport",
    "BasisSolution",
    "frobenius_init",
    "frobenius_coefficients",
    "solve_basis",
    "euclidean_mass",
    "hyperbolic_mass",
    "hyperbolic_conversion",
    "hyperbolic_profile",
    "hyperbolic_expansion_fit",
    "ExpansionFitResult",
    "lambda_star",
    "first_dirichlet_eigenvalue",
]


@dataclass(frozen=True)
class ShootingConfig:
    r0: float | None = None
    R: float | None = None
    tolerance: float = 1e-12
    correction_order: int = 1
    r0_factor: float = 1e-6
    acceptance: float | None = None

    def resolve(self, R):
        R = float(self.R if self.R is not None else R)
        r0 = float(self.r0 if self.r0 is not None else self.r0_factor * R)
        if not 0 < r0 < R / 100.0:
            raise PreconditionError("the inner radius must satisfy 0 < r0 < R/100")
        return r0, R


def _characteristic(params, q):
    ex = exponents(params)
    return (q + ex.beta_plus) * (q + ex.beta_minus)


def frobenius_coefficients(params, problem, sign):
    """Coefficients of the first correction ``K = r^-beta (1 + corr)``.

    Power type: ``corr = a r^kappa`` with ``kappa = 2 - theta``.
    Log type: ``corr = r^2 (a log(1/r) + b)``.  Returns ``(kappa, a, b)``.
    """
    ex = exponents(params)
    beta = ex.beta_plus if sign in ("+", 1) else ex.beta_minus
    if problem.h is None:
        return 2.0 - problem.theta, 0.0, 0.0
    if problem.log_type:
        q = 2.0 - beta
        pq = _characteristic(params, q)
        dp = 2.0 * q + params.n - 2
        a = -problem.lead / pq
        b = (a * dp - problem.sub) / pq
        return 2.0, a, b
    kappa = 2.0 - problem.theta
    a = -problem.lead / _characteristic(params, kappa - beta)
    return kappa, a, 0.0


def frobenius_init(params, problem, sign, r0, correction_order=1):
    """``(K(r0), K'(r0))`` from the truncated Frobenius series."""
    ex = exponents(params)
    beta = ex.beta_plus if sign in ("+", 1) else ex.beta_minus
    z, zt = _frobenius_z(params, problem, sign, r0, correction_order)
    head = r0 ** (-beta)
    return head * (1.0 + z), head * (zt - beta * (1.0 + z)) / r0


def _frobenius_z(params, problem, sign, r0, correction_order):
    if correction_order <= 0:
        return 0.0, 0.0
    kappa, a, b = frobenius_coefficients(params, problem, sign)
    if problem.log_type:
        L = math.log(1.0 / r0)
        z = r0 ** 2 * (a * L + b)
        zt = r0 ** 2 * (2.0 * (a * L + b) - a)
        return z, zt
    return a * r0 ** kappa, a * kappa * r0 ** kappa


@dataclass
class BasisSolution:
    """Dense solution ``z(t)`` for one singular solution."""

    beta: float
    sol: object
    t0: float
    t1: float
    nfev: int

    def z(self, r):
        t = np.log(np.asarray(r, dtype=float))
        return self.sol.sol(t)[0]

    def z_t(self, r):
        t = np.log(np.asarray(r, dtype=float))
        return self.sol.sol(t)[1]

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (-self.beta) * (1.0 + self.z(r))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        y, yt = self.sol.sol(np.log(r))
        return r ** (-self.beta - 1.0) * (yt - self.beta * (1.0 + y))

    def remainder(self, r):
        """``K(r) - r^-beta = r^-beta z``, free of cancellation."""
        r = np.asarray(r, dtype=float)
        return r ** (-self.beta) * self.z(r)


def _shoot(params, problem, sign, r0, R, config):
    ex = exponents(params)
    beta = ex.beta_plus if sign in ("+", 1) else ex.beta_minus
    damp = params.n - 2 - 2.0 * beta
    z0, zt0 = _frobenius_z(params, problem, sign, r0, config.correction_order)
    t0, t1 = math.log(r0), math.log(R)
    if problem.h is None:
        def rhs(t, y):
            return np.array([y[1], -damp * y[1]])
    elif problem.r2h is not None:
        r2h = problem.r2h

        def rhs(t, y):
            return np.array([y[1], -damp * y[1] - r2h(math.exp(t)) * (1.0 + y[0])])
    else:
        def rhs(t, y):
            r = math.exp(t)
            return np.array([y[1], -damp * y[1] - r * r * float(problem.h_eval(r)) * (1.0 + y[0])])
    atol = max(1e-30, config.tolerance * 1e-6 * max(abs(z0), 1e-12))
    sol = solve_ivp(rhs, (t0, t1), [z0, zt0], method="DOP853", rtol=config.tolerance,
                    atol=atol, dense_output=True)
    if sol.status != 0:
        raise StiffnessError(f"integration of K_{sign} failed: {sol.message}")
    return BasisSolution(beta, sol, t0, t1, sol.nfev)


def solve_basis(params, problem, config=None):
    """Both singular solutions on ``[r0, R]`` as radial functions plus dense data."""
    config = config or ShootingConfig()
    r0, R = config.resolve(problem.R)
    kp = _shoot(params, problem, "+", r0, R, config)
    km = _shoot(params, problem, "-", r0, R, config)
    grid = geometric_grid(params.n, R, r0, 1.05, Geometry.EUCLIDEAN)
    nodes = grid.nodes
    fp = RadialFunction(grid, kp.value(nodes), kp.derivative(nodes))
    fm = RadialFunction(grid, km.value(nodes), km.derivative(nodes))
    return fp, fm, kp, km


def _wronskian_spread(params, kp, km, r0, R):
    rs = np.geomspace(r0, R, 40)
    w = (kp.value(rs) * km.derivative(rs) - km.value(rs) * kp.derivative(rs)) * rs ** (params.n - 1)
    return float(np.max(np.abs(w - w[0])) / abs(w[0]))


@dataclass
class MassReport:
    c1: float
    c2: float
    mass: float
    mass_hyperbolic: float | None
    r0_used: float
    r0_halved_delta: float
    R: float
    wronskian_spread: float
    coercive: bool
    accepted: bool
    acceptance_tolerance: float
    k_plus: BasisSolution = field(repr=False, default=None)
    k_minus: BasisSolution = field(repr=False, default=None)
    profile: RadialFunction | None = field(repr=False, default=None)
    problem: object = field(repr=False, default=None)

    def K(self, r):
        return self.k_plus.value(r) + self.mass * self.k_minus.value(r)

    def dK(self, r):
        return self.k_plus.derivative(r) + self.mass * self.k_minus.derivative(r)

    def beta_part(self, r):
        """``K - r^-beta_+`` on ``r >= r0``."""
        return self.k_plus.remainder(r) + self.mass * self.k_minus.value(r)

    def as_dict(self):
        return {
            "c1": self.c1,
            "c2": self.c2,
            "mass": self.mass,
            "mass_hyperbolic": self.mass_hyperbolic,
            "r0_used": self.r0_used,
            "r0_halved_delta": self.r0_halved_delta,
            "R": self.R,
            "wronskian_spread": self.wronskian_spread,
            "coercive": self.coercive,
            "accepted": self.accepted,
            "acceptance_tolerance": self.acceptance_tolerance,
        }


def _check_mass_regime(params, problem):
    split = hardy_constant(params.n) - (2.0 - problem.theta) ** 2 / 4.0
    if problem.log_type:
        split = hardy_constant(params.n) - 1.0
        if params.gamma <= 0:
            raise RegimeError("a log-type perturbation needs gamma > 0 for the mass")
    if problem.h is not None and not params.gamma > split:
        raise RegimeError(
            f"the mass is defined for gamma > {split:.6g}; got gamma = {params.gamma}"
        )


def _mass_once(params, problem, r0, R, config):
    sub = ShootingConfig(r0=r0, R=R, tolerance=config.tolerance,
                         correction_order=config.correction_order)
    kp = _shoot(params, problem, "+", r0, R, sub)
    km = _shoot(params, problem, "-", r0, R, sub)
    ex = exponents(params)
    yp = 1.0 + kp.sol.y[0, -1]
    ym = 1.0 + km.sol.y[0, -1]
    return -(R ** (-ex.gap)) * yp / ym, kp, km


def _coercive(km, r0, R):
    ts = np.linspace(math.log(r0), math.log(R), 400)
    return bool(np.all(1.0 + km.sol.sol(ts)[0] > 0))


def euclidean_mass(params, problem, config=None, require_coercive=True):
    """Mass of ``-Delta - gamma/r^2 - h`` on the ball of radius ``problem.R``."""
    config = config or ShootingConfig()
    _check_mass_regime(params, problem)
    r0, R = config.resolve(problem.R)
    mass, kp, km = _mass_once(params, problem, r0, R, config)
    coercive = _coercive(km, r0, R)
    if require_coercive and not coercive:
        raise NonCoerciveError(
            "the regular solution K_- changes sign on (0, R]: the operator is not coercive"
        )
    mass_half, _, _ = _mass_once(params, problem, r0 / 2.0, R, config)
    delta = abs(mass_half - mass) / max(1.0, abs(mass))
    tol = config.acceptance
    if tol is None:
        tol = 1e-3 if problem.log_type else 1e-4
    grid = geometric_grid(params.n, R, r0, 1.05, Geometry.EUCLIDEAN)
    nodes = grid.nodes
    values = kp.value(nodes) + mass * km.value(nodes)
    values[-1] = 0.0
    profile = RadialFunction(grid, values, kp.derivative(nodes) + mass * km.derivative(nodes),
                             dirichlet=True)
    return MassReport(
        c1=1.0, c2=mass, mass=mass, mass_hyperbolic=None, r0_used=r0, r0_halved_delta=delta,
        R=R, wronskian_spread=_wronskian_spread(params, kp, km, r0, R), coercive=coercive,
        accepted=delta < tol, acceptance_tolerance=tol, k_plus=kp, k_minus=km,
        profile=profile, problem=problem,
    )


def hyperbolic_conversion(params):
    """Factor ``(n-2)^{-(beta_+ - beta_-)/(n-2)}`` from Euclidean to hyperbolic mass."""
    ex = exponents(params)
    return (params.n - 2) ** (-ex.gap / (params.n - 2))


def hyperbolic_mass(params, ball_radius, config=None, require_regime=True):
    """Hyperbolic mass of ``-Delta_B - gamma V_2 - lam`` on the centred ball ``B_R``.

    The coefficient of ``G^{alpha_+}`` in the singular solution is
    normalised to 1; the Euclidean mass of the transformed problem is
    converted with :func:`hyperbolic_conversion`.
    """
    n = params.n
    if require_regime and not params.gamma > max(n * (n - 4) / 4.0, 0.0):
        raise RegimeError(
            f"the hyperbolic mass needs gamma > max(n(n-4)/4, 0) = {max(n * (n - 4) / 4.0, 0.0)}"
        )
    problem = conformal.build_euclidean_problem(params, ball_radius)
    rep = euclidean_mass(params, problem, config)
    rep.mass_hyperbolic = rep.mass * hyperbolic_conversion(params)
    return rep


def hyperbolic_profile(report, params):
    """Singular hyperbolic solution ``K_H = c K / phi`` normalised on ``G^{alpha_+}``."""
    ex = exponents(params)
    n = params.n
    c = conformal.conformal_phi(n, 0.0) * (n - 2) ** (-ex.alpha_plus)

    def k_h(r):
        return c * report.K(r) / conformal.conformal_phi(n, r)

    return k_h


@dataclass(frozen=True)
class ExpansionFitResult:
    mass_hyperbolic: float
    corrections: tuple
    residual: float
    r_range: tuple


def hyperbolic_expansion_fit(report, params, r_lo=1e-4, r_hi=1e-3, samples=40):
    """Least-squares fit ``K_H - G^{alpha_+} = m G^{alpha_-} + sum_j c_j G^{alpha_+} r^{k_j}``.

    The correction exponents ``k_j`` are the first two orders of the
    regular expansion (``1, 2`` for n = 3, ``2`` and ``2 log r`` for n = 4,
    ``2, 4`` otherwise); without them the ``G^{alpha_-}`` coefficient would
    absorb the leading correction.
    """
    ex = exponents(params)
    n = params.n
    r = np.geomspace(r_lo, r_hi, samples)
    gp = kernels.green_G(n, r) ** ex.alpha_plus
    gm = kernels.green_G(n, r) ** ex.alpha_minus
    y = hyperbolic_profile(report, params)(r) - gp
    if n == 3:
        extra = [gp * r, gp * r * r]
    elif n == 4:
        extra = [gp * r * r, gp * r * r * np.log(r)]
    else:
        extra = [gp * r * r, gp * r ** 4]
    basis = np.column_stack([gm] + extra)
    scale = np.abs(basis).max(axis=0)
    coef, *_ = np.linalg.lstsq(basis / scale, y, rcond=None)
    coef = coef / scale
    resid = float(np.max(np.abs(basis @ coef - y)) / np.max(np.abs(gm)))
    return ExpansionFitResult(float(coef[0]), tuple(float(c) for c in coef[1:]), resid, (r_lo, r_hi))


def first_dirichlet_eigenvalue(params, ball_radius, lam_hi=None, rtol=1e-10, config=None):
    """First Dirichlet eigenvalue of ``-Delta_B - gamma V_2`` on ``B_R`` by shooting.

    It is the smallest ``lam`` at which the regular solution vanishes at ``R``.
    """
    config = config or ShootingConfig()

    def km_end(lam):
        p = params.replace(lam=lam)
        prob = conformal.build_euclidean_problem(p, ball_radius)
        r0, R = config.resolve(prob.R)
        km = _shoot(p, prob, "-", r0, R, config)
        return _coercive(km, r0, R) and (1.0 + km.sol.y[0, -1]) > 0

    lo = 0.0
    while not km_end(lo):
        lo -= 1.0 + abs(lo)
        if lo < -1e8:
            raise ConvergenceError("could not find a coercive lambda")
    hi = lam_hi if lam_hi is not None else 1.0 + abs(lo)
    while km_end(hi):
        lo, hi = hi, 2.0 * hi + 1.0
        if hi > 1e12:
            raise ConvergenceError("no sign change of the regular solution found")
    while hi - lo > rtol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if km_end(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class LambdaStarResult:
    lambda_star: float
    bracket: tuple
    mass_below: float
    mass_above: float
    iterations: int
    truncated: bool
    eigenvalue: float | None

    def as_dict(self):
        return {
            "lambda_star": self.lambda_star,
            "bracket": list(self.bracket),
            "mass_below": self.mass_below,
            "mass_above": self.mass_above,
            "iterations": self.iterations,
            "truncated": self.truncated,
            "first_eigenvalue": self.eigenvalue,
        }


def lambda_star(params, ball_radius, bracket=None, rtol=1e-6, config=None, probe=1e-3):
    """Threshold ``lam*`` where the hyperbolic mass changes sign.

    Bisection on ``sign(m^H(lam))``, which is increasing in ``lam`` while the
    operator stays coercive.  Without a bracket the search runs on
    ``[0, lam_1)`` with ``lam_1`` the first Dirichlet eigenvalue; an upper end
    beyond ``lam_1`` is truncated and reported.
    """
    config = config or ShootingConfig()
    lam1 = first_dirichlet_eigenvalue(params, ball_radius, config=config)
    truncated = False
    if bracket is None:
        lo, hi = 0.0, lam1 - 1e-6 * max(1.0, abs(lam1))
    else:
        lo, hi = float(bracket[0]), float(bracket[1])
        if hi >= lam1:
            hi = lam1 - 1e-6 * max(1.0, abs(lam1))
            truncated = True
        if not lo < hi:
            raise BracketError("bracket is empty after truncation at the first eigenvalue")

    def mass_at(lam):
        return hyperbolic_mass(params.replace(lam=lam), ball_radius, config).mass_hyperbolic

    m_lo, m_hi = mass_at(lo), mass_at(hi)
    if not (m_lo < 0 < m_hi):
        raise BracketError(
            f"mass has no sign change on [{lo}, {hi}]: m = {m_lo:.6g}, {m_hi:.6g}"
        )
    width = rtol * (hi - lo)
    a, b = lo, hi
    it = 0
    while b - a > width:
        mid = 0.5 * (a + b)
        if mass_at(mid) < 0:
            a = mid
        else:
            b = mid
        it += 1
    star = 0.5 * (a + b)
    below = mass_at(max(lo, star - probe))
    above = mass_at(min(hi, star + probe))
    return LambdaStarResult(star, (lo, hi), below, above, it, truncated, lam1)
