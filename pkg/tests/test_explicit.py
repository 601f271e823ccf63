import numpy as np
import pytest

from hyhardy import PreconditionError, exponents, make_params
from hyhardy import explicit, kernels, radial
from hyhardy.radial import Weight


def test_fundamental_solution_examples():
    p = make_params(3, 0.0)
    assert np.allclose(explicit.fundamental_solution(p, "-", np.linspace(0.1, 0.9, 9)), 1.0)
    assert explicit.fundamental_solution(p, "+", 0.5) == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(PreconditionError):
        explicit.fundamental_solution(p, "x", 0.5)


@pytest.mark.parametrize("n, g", [(3, 0.1), (5, 1.0), (6, -2.0)])
@pytest.mark.parametrize("sign", ["+", "-"])
def test_fundamental_solution_origin_limit(n, g, sign):
    p = make_params(n, g)
    ex = exponents(p)
    beta = ex.beta_plus if sign == "+" else ex.beta_minus
    alpha = ex.alpha_plus if sign == "+" else ex.alpha_minus
    r = 1e-7
    val = explicit.fundamental_solution(p, sign, r) * r ** beta
    assert val == pytest.approx((n - 2) ** (-alpha), rel=1e-5)


def test_profile_examples():
    p = make_params(5, 1.0, 0.7)
    assert explicit.profile_w(p, 2.0, 1.0) == pytest.approx(2.0 * 2 ** (-3 / 1.3), rel=1e-14)
    q = make_params(4, 0.0)
    tau = np.geomspace(1e-3, 1e3, 30)
    assert np.allclose(explicit.profile_w(q, 1.5, tau), 1.5 * (1 + tau * tau) ** (-1.0), rtol=1e-13)
    ex = exponents(p)
    assert explicit.profile_w(p, 1.0, 1e12) * 1e12 ** ex.beta_plus == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(PreconditionError):
        explicit.profile_w(p, 1.0, 0.0)


def test_profile_is_overflow_free():
    p = make_params(8, 3.0, 1.0)
    tau = np.array([1e-200, 1e-50, 1.0, 1e50, 1e200])
    w = explicit.profile_w(p, 1.0, tau)
    assert np.all(np.isfinite(w)) and np.all(w >= 0)


def test_profile_derivatives_match_differences():
    p = make_params(5, 1.0, 1.0)
    tau = np.geomspace(1e-2, 1e2, 15)
    w, d1, d2 = explicit.profile_w_derivatives(p, 1.0, tau)
    h = 1e-4 * tau
    fp, fm = explicit.profile_w(p, 1.0, tau + h), explicit.profile_w(p, 1.0, tau - h)
    assert np.allclose(d1, (fp - fm) / (2 * h), rtol=1e-7)
    assert np.allclose(d2, (fp - 2 * w + fm) / h ** 2, rtol=1e-5)


@pytest.mark.parametrize("n, g, s", [(3, 0.1, 0.0), (5, 1.0, 1.0), (4, -1.0, 0.5)])
def test_extremal_hyperbolic_definition(n, g, s):
    p = make_params(n, g, s)
    r = np.geomspace(1e-5, 0.999, 60)
    tau = kernels.green_G(n, r) ** (-1.0 / (n - 2))
    assert np.allclose(explicit.extremal_hyperbolic(p, 1.3, r), explicit.profile_w(p, 1.3, tau),
                       rtol=1e-12)
    r1 = kernels.green_G_inverse(n, 1.0)
    assert explicit.extremal_hyperbolic(p, 1.3, r1) == pytest.approx(1.3 * 2 ** (-(n - 2) / (2 - s)),
                                                                   rel=1e-12)


@pytest.mark.parametrize("n, g, s", [(3, 0.1, 0.0), (5, 1.0, 1.0)])
def test_extremal_origin_behaviour(n, g, s):
    p = make_params(n, g, s)
    ex = exponents(p)
    vals = [explicit.extremal_hyperbolic(p, 1.0, r) * r ** ex.beta_minus for r in (1e-8, 1e-9)]
    assert vals[0] > 0
    assert vals[0] == pytest.approx((n - 2) ** (-ex.alpha_minus), rel=1e-4)
    assert vals[1] == pytest.approx(vals[0], rel=1e-4)


def test_extremal_derivative():
    p = make_params(5, 1.0, 1.0)
    r = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (explicit.extremal_hyperbolic(p, 1.0, r + h) - explicit.extremal_hyperbolic(p, 1.0, r - h)) / (2 * h)
    assert np.allclose(explicit.extremal_hyperbolic_derivative(p, 1.0, r), fd, rtol=1e-6)


def test_bubble_scaling():
    p = make_params(5, 1.0, 1.0)
    rho = np.geomspace(1e-4, 1e4, 50)
    U = explicit.bubble_U_eps(p, 1.0, rho)
    assert np.allclose(U, explicit.profile_w(p, 1.0, rho), rtol=1e-15)
    for eps in (0.01, 0.3, 7.0):
        scaled = explicit.bubble_U_eps(p, eps, eps * rho) * eps ** 1.5
        assert np.allclose(scaled, U, rtol=1e-14)
    with pytest.raises(PreconditionError):
        explicit.bubble_U_eps(p, 0.0, 1.0)


def test_bubble_origin_and_infinity_amplitudes():
    # rho -> 0 : eps^{-gap/2};  rho -> inf : eps^{+gap/2}
    p = make_params(5, 2.0, 1.0)
    ex = exponents(p)
    for eps in (0.1, 0.5, 4.0):
        lo = explicit.bubble_U_eps(p, eps, 1e-100 * eps) * (1e-100 * eps) ** ex.beta_minus
        hi = explicit.bubble_U_eps(p, eps, 1e100 * eps) * (1e100 * eps) ** ex.beta_plus
        assert lo == pytest.approx(eps ** (-ex.gap / 2), rel=1e-8)
        assert hi == pytest.approx(eps ** (ex.gap / 2), rel=1e-8)


def test_bubble_derivative_and_monotone():
    p = make_params(3, 0.2, 0.5)
    rho = np.geomspace(1e-3, 1e3, 200)
    h = 1e-6 * rho
    fd = (explicit.bubble_U_eps(p, 0.3, rho + h) - explicit.bubble_U_eps(p, 0.3, rho - h)) / (2 * h)
    d = explicit.bubble_U_eps_derivative(p, 0.3, rho)
    assert np.allclose(d, fd, rtol=1e-6)
    assert np.all(d < 0)


@pytest.mark.parametrize("n", range(3, 9))
def test_chi_classical(n):
    assert explicit.multiplier_chi(make_params(n, 0.0)) == pytest.approx(n * (n - 2), rel=1e-10)


@pytest.mark.parametrize("n, g, s", [(3, 0.1, 0.0), (3, 0.2, 1.5), (5, 1.0, 1.0), (6, 3.0, 0.2)])
def test_chi_constant_and_closed_form(n, g, s):
    p = make_params(n, g, s)
    a, b = explicit._chi_ratio(p, np.array([0.1, 10.0]))
    assert a == pytest.approx(b, rel=1e-8)
    chi = explicit.multiplier_chi(p)
    assert chi > 0
    ex = exponents(p)
    assert chi == pytest.approx((n - s) * ex.gap ** 2 / (n - 2), rel=1e-9)


def test_amplitude_multiplier_relation():
    p = make_params(5, 1.0, 1.0)
    base = explicit.extremal_profile(p, 1.0)
    for t in (0.5, 2.0):
        prof = explicit.extremal_profile(p, t)
        assert prof.effective_multiplier() == pytest.approx(base.chi * t ** (2 - p.p), rel=1e-14)
    c = explicit.normalized_amplitude(p)
    assert explicit.extremal_profile(p, c).effective_multiplier() == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(PreconditionError):
        explicit.ExtremalProfile(p, -1.0, 1.0)


def test_residual_examples():
    p = make_params(5, 1.0, 1.0)
    ex = exponents(p)
    sig = np.geomspace(1e-2, 1e2, 21)
    for alpha in (ex.alpha_plus, ex.alpha_minus):
        res = explicit.residual_sigma_ode(lambda x: x ** alpha, p, sig)
        assert np.all(np.abs(res) < 1e-8 * sig ** (alpha - 2))
    const = explicit.residual_sigma_ode(lambda x: np.ones_like(x), p, sig)
    assert np.allclose(const, p.gamma / sig ** 2, rtol=1e-12)
    v = explicit.extremal_sigma(p, explicit.normalized_amplitude(p))
    assert np.max(np.abs(explicit.residual_sigma_ode(v, p, sig, nonlinear=True, scaled=True))) < 1e-6


def _bump(n=5):
    grid = radial.geometric_grid(n, 0.95, 1e-8)
    return radial.smooth_bump(grid, 0.05, 0.7, modulation=(0.4, -1.0))


def test_rescale_identity_and_group():
    u = _bump()
    same = explicit.hyperbolic_rescale(u, 1.0)
    r = np.linspace(0.01, 0.9, 40)
    assert np.allclose(same(r), u(r), rtol=1e-12, atol=1e-14)
    back = explicit.hyperbolic_rescale(explicit.hyperbolic_rescale(u, 2.5), 1 / 2.5)
    assert np.allclose(back(r), u(r), rtol=1e-9, atol=1e-12)
    with pytest.raises(PreconditionError):
        explicit.hyperbolic_rescale(u, -1.0)


@pytest.mark.parametrize("lam", [0.5, 2.0, 5.0])
def test_rescale_preserves_integrals(lam):
    u = _bump()
    ul = explicit.hyperbolic_rescale(u, lam)
    for w in (Weight.gradient(), Weight.hardy(), Weight.sobolev(10 / 3), Weight.sobolev(8 / 3)):
        assert radial.integrate_hyperbolic(ul, w) == pytest.approx(radial.integrate_hyperbolic(u, w),
                                                                    rel=1e-6)
