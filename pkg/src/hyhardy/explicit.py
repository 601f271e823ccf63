"""Fundamental solutions, extremal profiles, bubbles and the hyperbolic scaling.

The canonical profile is

    w(tau) = c (tau^{a beta_-} + tau^{a beta_+})^{-1/a},   a = (2 - s)/(n - 2),

and every evaluation goes through ``log tau`` so that the power sum never
overflows.  Writing ``q_pm`` for the softmax weights of the two exponents
``p_pm = a beta_pm`` gives closed forms for ``w'`` and ``w''`` that are
stable for ``tau`` anywhere in ``(0, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConsistencyError, PreconditionError
from .params import exponents
from .radial import RadialFunction

__all__ = [
    "ExtremalProfile",
    "fundamental_solution",
    "profile_w",
    "profile_w_derivatives",
    "extremal_hyperbolic",
    "extremal_hyperbolic_derivative",
    "extremal_sigma",
    "bubble_U_eps",
    "bubble_U_eps_derivative",
    "hyperbolic_rescale",
    "multiplier_chi",
    "normalized_amplitude",
    "extremal_profile",
    "residual_sigma_ode",
]


def _sign_index(sign):
    if sign in ("+", 1, "plus"):
        return True
    if sign in ("-", -1, "minus"):
        return False
    raise PreconditionError(f"sign must be '+' or '-', got {sign!r}")


def fundamental_solution(params, sign, r):
    """``G(r)^{alpha_pm}``, the two radial solutions of the linear equation."""
    ex = exponents(params)
    alpha = ex.alpha_plus if _sign_index(sign) else ex.alpha_minus
    logg = kernels.log_green_G(params.n, r)
    with np.errstate(divide="ignore", under="ignore"):
        return np.exp(alpha * logg)


def _log_profile(params, logtau):
    """``log w`` (c = 1) and the first two log-moments of the exponents."""
    ex = exponents(params)
    a = (2.0 - params.s) / (params.n - 2)
    pm, pp = a * ex.beta_minus, a * ex.beta_plus
    lm, lp = pm * logtau, pp * logtau
    top = np.maximum(lm, lp)
    em, ep = np.exp(lm - top), np.exp(lp - top)
    norm = em + ep
    qm, qp = em / norm, ep / norm
    logw = -(top + np.log(norm)) / a
    m1 = pm * qm + pp * qp
    m2 = pm * pm * qm + pp * pp * qp
    return logw, m1, m2, a


def profile_w(params, c, tau):
    """``w(tau) = c (tau^{(2-s)b_-/(n-2)} + tau^{(2-s)b_+/(n-2)})^{-(n-2)/(2-s)}``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise PreconditionError("profile_w requires tau > 0")
    logw, _, _, _ = _log_profile(params, np.log(tau))
    out = c * np.exp(logw)
    return float(out) if out.ndim == 0 else out


def profile_w_derivatives(params, c, tau):
    """``(w, w', w'')`` at ``tau`` from the analytic log-moment formulas."""
    tau = np.asarray(tau, dtype=float)
    logw, m1, m2, a = _log_profile(params, np.log(tau))
    w = c * np.exp(logw)
    d1 = -w * m1 / (a * tau)
    d2 = w * ((1.0 / a) * (1.0 / a + 1.0) * m1 * m1 - (m2 - m1) / a) / (tau * tau)
    return w, d1, d2


def extremal_hyperbolic(params, c, r):
    """``U(r) = w(G(r)^{-1/(n-2)})``, the explicit radial solution on the ball."""
    logtau = -kernels.log_green_G(params.n, r) / (params.n - 2)
    logw, _, _, _ = _log_profile(params, logtau)
    out = c * np.exp(logw)
    return float(out) if np.ndim(out) == 0 else out


def extremal_hyperbolic_derivative(params, c, r):
    """``dU/dr``, using ``d tau/dr = tau f / ((n-2) G)``."""
    n = params.n
    r = np.asarray(r, dtype=float)
    logg = kernels.log_green_G(n, r)
    logtau = -logg / (n - 2)
    logw, m1, _, a = _log_profile(params, logtau)
    logf = (n - 2) * np.log1p(-r * r) - (n - 1) * np.log(r)
    # w'(tau) dtau/dr = -(w m1/(a tau)) * tau f/((n-2) G)
    return -c * m1 / (a * (n - 2)) * np.exp(logw + logf - logg)


def extremal_sigma(params, c):
    """The profile as a function of ``sigma = G(r)``: ``v(sigma) = w(sigma^{-1/(n-2)})``."""
    n = params.n

    def v(sigma):
        sigma = np.asarray(sigma, dtype=float)
        logw, _, _, _ = _log_profile(params, -np.log(sigma) / (n - 2))
        return c * np.exp(logw)

    return v


def bubble_U_eps(params, eps, rho):
    """``U_eps(rho) = eps^{-(n-2)/2} U(rho/eps)`` with the c = 1 profile."""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    rho = np.asarray(rho, dtype=float)
    logw, _, _, _ = _log_profile(params, np.log(rho) - math.log(eps))
    out = np.exp(logw - 0.5 * (params.n - 2) * math.log(eps))
    return float(out) if out.ndim == 0 else out


def bubble_U_eps_derivative(params, eps, rho):
    rho = np.asarray(rho, dtype=float)
    logw, m1, _, a = _log_profile(params, np.log(rho) - math.log(eps))
    out = -np.exp(logw - 0.5 * (params.n - 2) * math.log(eps)) * m1 / (a * rho)
    return float(out) if out.ndim == 0 else out


def hyperbolic_rescale(u, lam):
    """``u_lam(r) = lam^{-1/2} u(G^{-1}(lam G(r)))`` on the same grid.

    The returned function composes the evaluators of ``u``; its derivative
    uses ``d/dr G^{-1}(lam G(r)) = lam f(r) / f(rho)``.
    """
    if not lam > 0:
        raise PreconditionError("lam must be positive")
    n = u.n
    scale = lam ** -0.5

    def inner(r):
        return kernels.green_G_inverse(n, lam * kernels.green_G(n, r))

    def func(r):
        r = np.asarray(r, dtype=float)
        return scale * np.asarray(u(inner(r)))

    def dfunc(r):
        r = np.asarray(r, dtype=float)
        rho = inner(r)
        return scale * np.asarray(u.deriv(rho)) * lam * kernels.f_weight(n, r) / kernels.f_weight(n, rho)

    support = None
    if u.support is not None:
        lo, hi = u.support
        new_hi = kernels.green_G_inverse(n, kernels.green_G(n, hi) / lam) if hi < 1 else 1.0
        new_lo = 0.0 if lo <= 0 else kernels.green_G_inverse(n, kernels.green_G(n, lo) / lam)
        support = (float(new_lo), float(new_hi))
    nodes = u.grid.nodes
    core = nodes[nodes < 1.0]
    values = np.zeros_like(nodes)
    values[: core.size] = func(core)
    der = np.zeros_like(nodes)
    der[: core.size] = dfunc(core)
    return RadialFunction(u.grid, values, der, func, dfunc, u.dirichlet and values[-1] == 0, support)


def _chi_ratio(params, tau):
    n, s, gamma = params.n, params.s, params.gamma
    w, d1, d2 = profile_w_derivatives(params, 1.0, tau)
    p = 2.0 * (n - s) / (n - 2)
    lhs = -d2 - (n - 1) * d1 / tau - gamma * w / (tau * tau)
    return lhs * tau ** s / w ** (p - 1.0)


def multiplier_chi(params, check=True, rtol=1e-6):
    """Constant ``chi`` with ``-w'' - (n-1)w'/tau - gamma w/tau^2 = chi tau^-s w^{p-1}``.

    Evaluated at ``tau = 1`` for the c = 1 profile.  With ``check`` the same
    ratio is sampled on ``[1e-2, 1e2]`` and a spread beyond ``rtol`` raises
    :class:`ConsistencyError`.
    """
    chi = float(_chi_ratio(params, np.array(1.0)))
    if check:
        taus = np.geomspace(1e-2, 1e2, 41)
        ratios = _chi_ratio(params, taus)
        spread = float(np.max(np.abs(ratios - chi)) / abs(chi))
        if not spread <= rtol:
            raise ConsistencyError(f"multiplier is not constant in tau: spread {spread:.3e}")
    return chi


def normalized_amplitude(params):
    """Amplitude ``c`` for which ``c w_1`` solves the equation with multiplier 1."""
    p = params.p
    return multiplier_chi(params) ** (1.0 / (p - 2.0))


@dataclass(frozen=True)
class ExtremalProfile:
    params: object
    c: float
    chi: float

    def __post_init__(self):
        if not (self.c > 0 and self.chi > 0):
            raise PreconditionError("amplitude and multiplier must be positive")

    def __call__(self, tau):
        return profile_w(self.params, self.c, tau)

    def effective_multiplier(self):
        """Multiplier of ``c w_1``: ``chi c^{2 - p}``."""
        return self.chi * self.c ** (2.0 - self.params.p)


def extremal_profile(params, c=1.0):
    return ExtremalProfile(params, float(c), multiplier_chi(params))


def residual_sigma_ode(v, params, sigma, nonlinear=False, scaled=False, rel_step=2e-3):
    """Left-hand side of ``(n-2)^2 v'' + gamma v/sigma^2 [+ sigma^{-(p+2)/2} v^{p-1}]``.

    ``v''`` comes from a five-point central stencil with step
    ``rel_step * sigma``; the default balances O(h^4) truncation against
    rounding for profiles that vary on the scale of ``sigma``.  With
    ``scaled`` the result is divided by the sum of the absolute values of
    the individual terms.
    """
    n, gamma = params.n, params.gamma
    sigma = np.asarray(sigma, dtype=float)
    h = rel_step * sigma
    vm2, vm1, v0, vp1, vp2 = (np.asarray(v(sigma + k * h)) for k in (-2, -1, 0, 1, 2))
    d2 = (-vp2 + 16 * vp1 - 30 * v0 + 16 * vm1 - vm2) / (12 * h * h)
    terms = [(n - 2) ** 2 * d2, gamma * v0 / (sigma * sigma)]
    if nonlinear:
        p = params.p
        terms.append(sigma ** (-(p + 2) / 2.0) * np.abs(v0) ** (p - 1))
    out = sum(terms)
    if scaled:
        out = out / np.maximum(sum(np.abs(t) for t in terms), 1e-300)
    return out
