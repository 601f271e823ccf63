"""Self-verification suites run by ``hyhardy verify``.

Every check compares a computed quantity with an independent oracle
(closed form, a second quadrature route or an exact special-function
solution) and records the measured discrepancy next to its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import jv

from . import conformal, explicit, kernels, mass, radial, variational
from .params import critical_exponent, exponents, hardy_constant, make_params

SUITES = ("kernels", "scaling", "hardy", "conformal", "mass")


@dataclass
class Check:
    name: str
    status: str
    measured: float
    tolerance: float | None
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class VerifyReport:
    suite: str
    checks: list

    @property
    def passed(self):
        return all(c.status != "fail" for c in self.checks)

    def as_dict(self):
        return {"suite": self.suite, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def _upper(name, measured, tol, **detail):
    measured = float(measured)
    return Check(name, "pass" if measured < tol else "fail", measured, tol, detail)


# ---------------------------------------------------------------- kernels
def green_quadrature(n, r):
    """``int_r^1 (1 - t^2)^{n-2} t^{1-n} dt`` by adaptive Gauss-Kronrod on a log split."""
    pieces = np.unique(np.concatenate([np.geomspace(r, 1.0, 12), [1.0]]))
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, _ = integrate.quad(lambda t: (1 - t * t) ** (n - 2) * t ** (1 - n), a, b,
                                epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total


def green_oracle_error(dims=range(3, 9), radii=None):
    radii = np.geomspace(1e-4, 0.99, 25) if radii is None else radii
    worst = 0.0
    for n in dims:
        closed = kernels.green_G(n, radii)
        quad = np.array([green_quadrature(n, r) for r in radii])
        worst = max(worst, float(np.max(np.abs(closed / quad - 1.0))))
    return worst


def holder_error(samples=200, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(3, 9))
        s = float(rng.uniform(0.0, 2.0))
        r = float(rng.uniform(1e-3, 0.999))
        p = critical_exponent(n, s)
        lhs = kernels.log_weight_V_p(n, p, r)
        rhs = 0.5 * s * kernels.log_weight_V_p(n, 2.0, r) + 0.5 * (2.0 - s) * kernels.log_weight_V_p(
            n, critical_exponent(n, 0.0), r
        )
        worst = max(worst, abs(math.expm1(lhs - rhs)))
    return worst


def kernels_suite():
    checks = [
        _upper("green_closed_form_vs_quadrature", green_oracle_error(), 1e-10),
        _upper("holder_factorization_V_p", holder_error(), 1e-12),
    ]
    chi_err = max(
        abs(explicit.multiplier_chi(make_params(n, 0.0)) / (n * (n - 2)) - 1.0) for n in range(3, 9)
    )
    checks.append(_upper("chi_gamma0_equals_n_n_minus_2", chi_err, 1e-10))
    lin = 0.0
    nonlin = 0.0
    sig = np.geomspace(1e-2, 1e2, 21)
    for n, g, s in [(3, 0.1, 0.0), (5, 1.0, 1.0), (6, 1.5, 0.5), (4, 0.5, 1.5)]:
        p = make_params(n, g, s)
        ex = exponents(p)
        for alpha in (ex.alpha_plus, ex.alpha_minus):
            res = explicit.residual_sigma_ode(lambda x, a=alpha: x ** a, p, sig, scaled=True)
            lin = max(lin, float(np.max(np.abs(res))))
        v = explicit.extremal_sigma(p, explicit.normalized_amplitude(p))
        res = explicit.residual_sigma_ode(v, p, sig, nonlinear=True, scaled=True)
        nonlin = max(nonlin, float(np.max(np.abs(res))))
    checks.append(_upper("fundamental_solution_residual", lin, 1e-8))
    checks.append(_upper("extremal_nonlinear_residual", nonlin, 1e-6))
    return checks


# ---------------------------------------------------------------- scaling
def scaling_suite():
    checks = []
    worst = 0.0
    n, s = 5, 1.0
    grid = radial.geometric_grid(n, 0.95, 1e-8)
    u = radial.smooth_bump(grid, 0.05, 0.7, modulation=(0.4, -1.0))
    weights = [radial.Weight.gradient(), radial.Weight.hardy(),
               radial.Weight.sobolev(critical_exponent(n, 0.0)),
               radial.Weight.sobolev(critical_exponent(n, s))]
    base = [radial.integrate_hyperbolic(u, w) for w in weights]
    for lam in (0.5, 2.0, 5.0):
        ul = explicit.hyperbolic_rescale(u, lam)
        for w, b in zip(weights, base):
            worst = max(worst, abs(radial.integrate_hyperbolic(ul, w) / b - 1.0))
    checks.append(_upper("hyperbolic_rescale_invariance", worst, 1e-6))
    ratios = []
    for p in (2.0, 10.0 / 3.0):
        vp, grad = radial.identity_ratio(u, p)
        ratios.extend([vp, grad])
    const = radial.metric_constant(n)
    checks.append(_upper("sigma_line_identities", max(abs(x / const - 1) for x in ratios), 1e-6,
                         constant=const))
    return checks


# ---------------------------------------------------------------- hardy
def hardy_suite(seed=0):
    checks = []
    band = 0.0
    detail = {}
    for n in (3, 4, 5):
        grid = radial.geometric_grid(n, 0.9, r_min=1e-14, ratio=1.1)
        val = variational.hardy_quotient_minimum(n, grid)
        gh = hardy_constant(n)
        detail[str(n)] = val
        if val < gh:
            band = max(band, 1.0 + (gh - val) / gh)
        band = max(band, val / gh - 1.0)
    checks.append(_upper("discrete_hardy_minimum_in_band", band, 0.05, minima=detail))
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(40):
        n = int(rng.integers(3, 7))
        a = float(rng.uniform(0.0, 0.4))
        b = float(rng.uniform(a + 0.05, 0.95))
        grid = radial.geometric_grid(n, 0.99, 1e-9)
        mods = tuple(rng.normal(size=2))
        u = radial.smooth_bump(grid, 0.0 if rng.random() < 0.5 else a, b, modulation=mods)
        q = radial.integrate_hyperbolic(u, radial.Weight.gradient()) / radial.integrate_hyperbolic(
            u, radial.Weight.hardy()
        )
        worst = min(worst, q - hardy_constant(n))
    checks.append(Check("hardy_bound_random_profiles", "pass" if worst >= -1e-6 else "fail",
                        float(worst), -1e-6, {"note": "min of quotient - (n-2)^2/4"}))
    return checks


# ---------------------------------------------------------------- conformal
def conformal_identity_error(count=1000):
    r = np.geomspace(1e-6, 0.999, count)
    v = conformal.expanded_V2_euclidean(3, r)
    exact = 1.0 / r ** 2 + 4.0 / (r * (1.0 - r)) + 4.0 / (1.0 - r) ** 2
    return float(np.max(np.abs(v - exact) / v))


def b0_checks():
    out = []
    for n, s in [(3, 0.0), (3, 1.0), (4, 0.5), (5, 0.0), (5, 1.2), (6, 0.5)]:
        rep = conformal.b0_limit(make_params(n, 0.0, s))
        status = "pass" if rep.matches in ("derived", "published") else "fail"
        out.append(Check(
            f"b0_limit_n{n}_s{s:g}", status, rep.ratio_published_to_numeric, None,
            {"numeric_limit": rep.numeric_limit, "derived": rep.closed_form,
             "published": rep.published, "matches": rep.matches,
             "ratio_published_to_numeric": rep.ratio_published_to_numeric},
        ))
    return out


def conformal_suite():
    checks = [_upper("n3_exact_conformal_identity", conformal_identity_error(), 1e-12)]
    worst = 0.0
    for n, g, s in [(3, 0.1, 0.0), (5, 1.0, 1.0), (4, 0.5, 0.5)]:
        p = make_params(n, g, s)
        c = explicit.normalized_amplitude(p)
        prob = conformal.build_euclidean_problem(p, 0.8)
        r = np.geomspace(1e-3, 0.4, 50)
        h = 1e-4 * r

        def v(x):
            return explicit.extremal_hyperbolic(p, c, x) * conformal.conformal_phi(n, x)

        v0 = v(r)
        d1 = (v(r + h) - v(r - h)) / (2 * h)
        d2 = (v(r + h) - 2 * v0 + v(r - h)) / (h * h)
        worst = max(worst, float(np.max(np.abs(conformal.euclidean_residual(prob, v0, d1, d2, r)))))
    checks.append(_upper("pushed_forward_extremal_residual", worst, 1e-5))
    checks.extend(b0_checks())
    return checks


# ---------------------------------------------------------------- mass
def bessel_mass(params, coefficient, theta, R):
    """Exact mass for ``h = C r^-theta`` from Bessel functions of order ``gap/(2-theta)``."""
    d = exponents(params).gap
    kap = 2.0 - theta
    nu = d / kap
    k = 2.0 * math.sqrt(coefficient) / kap
    x = k * R ** (kap / 2.0)
    kp = gamma_fn(1 - nu) * (k / 2) ** nu * jv(-nu, x)
    km = gamma_fn(1 + nu) * (k / 2) ** (-nu) * jv(nu, x)
    return -kp / km


def mass_suite():
    checks = []
    worst = 0.0
    negative = True
    for n in (3, 4, 5):
        for g in (0.0, 0.1, 0.2):
            for R in (0.5, 1.0, 2.0):
                p = make_params(n, g)
                rep = mass.euclidean_mass(p, conformal.EuclideanProblem.unperturbed(p, R))
                exact = -R ** (-exponents(p).gap)
                worst = max(worst, abs(rep.mass / exact - 1.0))
                negative &= rep.mass < 0
    checks.append(_upper("h_zero_closed_form", worst, 1e-6))
    checks.append(Check("h_zero_mass_negative", "pass" if negative else "fail", float(negative), None))
    bworst = 0.0
    halving = 0.0
    for n, g, c, th, R in [(3, 0.15, 2.0, 1.0, 0.7), (5, 2.0, 3.0, 0.5, 0.8), (4, 0.6, 1.0, 0.0, 1.0)]:
        p = make_params(n, g, theta=th)
        rep = mass.euclidean_mass(p, conformal.EuclideanProblem.power(p, R, c, th))
        bworst = max(bworst, abs(rep.mass / bessel_mass(p, c, th, R) - 1.0))
        halving = max(halving, rep.r0_halved_delta)
    checks.append(_upper("bessel_power_potential", bworst, 1e-6))
    for n, g, lam in [(3, 0.2, 0.0), (4, 0.5, 1.0), (5, 1.89, 5.0)]:
        rep = mass.hyperbolic_mass(make_params(n, g, lam=lam), 0.5)
        halving = max(halving, rep.r0_halved_delta)
    checks.append(_upper("r0_halving_self_certification", halving, 1e-4))
    return checks


_RUNNERS = {
    "kernels": kernels_suite,
    "scaling": scaling_suite,
    "hardy": hardy_suite,
    "conformal": conformal_suite,
    "mass": mass_suite,
}


def run_suite(name):
    """Run one suite (or ``"all"``) and return a :class:`VerifyReport`."""
    if name == "all":
        checks = []
        for key in SUITES:
            checks.extend(_RUNNERS[key]())
        return VerifyReport("all", checks)
    if name not in _RUNNERS:
        raise KeyError(name)
    return VerifyReport(name, _RUNNERS[name]())
