import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyhardy import DomainError, PreconditionError, RegimeKind, make_params
from hyhardy import conformal, explicit, radial, variational
from hyhardy.params import hyperbolic_theta
from hyhardy.radial import Geometry, Weight


def test_phi_examples():
    assert conformal.conformal_phi(3, 0.0) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert conformal.conformal_phi(4, 0.5) == pytest.approx(8 / 3, rel=1e-15)
    with pytest.raises(DomainError):
        conformal.conformal_phi(3, 1.0)
    with pytest.raises(DomainError):
        conformal.conformal_phi(3, -0.1)


def _bump(n, R=0.9):
    grid = radial.geometric_grid(n, R, 1e-8)
    return radial.smooth_bump(grid, 0.05, 0.8 * R, modulation=(0.5, -0.7))


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_push_pull_roundtrip(n):
    u = _bump(n)
    v = conformal.push_forward(u)
    assert v.grid.geometry is Geometry.EUCLIDEAN
    back = conformal.pull_back(v)
    r = np.linspace(0.01, 0.85, 30)
    assert np.allclose(back(r), u(r), rtol=1e-13, atol=1e-16)
    assert np.allclose(back.deriv(r), u.deriv(r), rtol=1e-11, atol=1e-14)


def test_push_forward_needs_interior_ball():
    grid = radial.geometric_grid(3, 1.0, closed=False)
    u = radial.smooth_bump(grid, 0.1, 0.5)
    with pytest.raises(PreconditionError):
        conformal.push_forward(u)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_energy_identity(n):
    u = _bump(n)
    v = conformal.push_forward(u)
    lhs = radial.integrate_hyperbolic(u, Weight.gradient()) - n * (n - 2) / 4 * radial.integrate_hyperbolic(
        u, Weight.plain())
    rhs = radial.integrate_euclidean(v, Weight.gradient())
    assert lhs == pytest.approx(rhs, rel=1e-9)


@pytest.mark.parametrize("n, p", [(3, 6.0), (5, 10 / 3), (4, 3.0)])
def test_sobolev_weight_transfer(n, p):
    s = n - p * (n - 2) / 2
    params = make_params(n, 0.0, s)
    u = _bump(n)
    v = conformal.push_forward(u)
    lhs = radial.integrate_hyperbolic(u, Weight.sobolev(params.p))
    b = lambda r: conformal.weight_b(params, r)
    rhs = radial.integrate_euclidean(v, Weight.euclidean_hs(params.s, params.p, b))
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_dimension_three_expansion_exact():
    r = np.geomspace(1e-6, 0.999, 500)
    exact = 1 / r ** 2 + 4 / (r * (1 - r)) + 4 / (1 - r) ** 2
    assert np.allclose(conformal.expanded_V2_euclidean(3, r), exact, rtol=1e-12)
    a = conformal.perturbation_a(3, r)
    assert np.all(a > 0)


def test_perturbation_heads():
    r = np.array([1e-5, 1e-6])
    assert np.allclose(conformal.perturbation_a(3, r) * r, 4.0, rtol=1e-4)
    assert np.allclose(conformal.perturbation_a(4, r) - 8 * np.log(1 / r), -4.0, atol=1e-4)
    assert np.allclose(conformal.perturbation_a(5, r), 12.0, rtol=1e-4)
    # first correction for n = 5 is linear in r with slope -32
    assert (conformal.perturbation_a(5, 1e-6) - 12.0) / 1e-6 == pytest.approx(-32.0, rel=1e-3)
    for n in (6, 7, 8):
        assert conformal.perturbation_a(n, 1e-6) == pytest.approx(4 * (n - 2) / (n - 4), rel=1e-5)
    with pytest.raises(DomainError):
        conformal.perturbation_a(3, 0.0)


def test_potential_heads():
    p5 = make_params(5, 1.0, lam=2.0)
    assert conformal.potential_h(p5, 1e-7) == pytest.approx(12 + 8 - 15, rel=1e-5)
    p4 = make_params(4, 0.5, lam=1.0)
    r = 1e-7
    assert conformal.potential_h(p4, r) - 4 * math.log(1 / r) == pytest.approx(-2 + 4 - 8, abs=1e-4)
    p3 = make_params(3, 0.2, lam=0.0)
    assert conformal.potential_h(p3, 1e-8) * 1e-8 == pytest.approx(0.8, rel=1e-6)


@pytest.mark.parametrize("n, s", [(3, 0.0), (3, 1.0), (4, 0.5), (5, 0.0), (5, 1.2), (6, 0.5)])
def test_b_at_origin(n, s):
    p = make_params(n, 0.0, s)
    rep = conformal.b0_limit(p)
    assert rep.matches == "derived"
    assert conformal.weight_b(p, 0.0) == pytest.approx(conformal.b0_derived(p), rel=1e-12)
    assert rep.ratio_published_to_numeric == pytest.approx(n - 2, rel=1e-6)


def test_b_examples():
    assert conformal.b0_derived(make_params(3, 0.0, 0.0)) == pytest.approx(0.25, rel=1e-15)
    assert conformal.b0_derived(make_params(4, 0.0, 2 / 3)) == pytest.approx(2 ** (2 / 3) * 2 ** (-4 / 3),
                                                                           rel=1e-14)
    p = make_params(5, 0.0, 1.0)
    r = np.linspace(0.0, 0.99, 50)
    b = conformal.weight_b(p, r)
    assert np.all(np.isfinite(b)) and np.all(b > 0)


def test_b_slope_at_origin():
    # even in r for n >= 4, a nonzero linear term for n = 3
    for n, odd in ((3, True), (5, False)):
        p = make_params(n, 0.0, 0.5)
        h = 1e-5
        slope = (conformal.weight_b(p, h) - conformal.weight_b(p, 0.0)) / h
        if odd:
            assert abs(slope) > 1e-2
        else:
            assert abs(slope) < 1e-3


def test_theta_classification():
    assert hyperbolic_theta(3) == (1.0, False)
    assert hyperbolic_theta(4) == (0.0, True)
    for n in (5, 6, 9):
        assert hyperbolic_theta(n) == (0.0, False)
    prob = conformal.build_euclidean_problem(make_params(4, 0.5, lam=0.5), 0.5)
    assert prob.log_type and prob.regime.kind is RegimeKind.LOW_DIM_MASS_NEEDED
    prob = conformal.build_euclidean_problem(make_params(5, 1.0, lam=2.0), 0.5)
    assert prob.regime.kind is RegimeKind.HIGH_DIM


@pytest.mark.parametrize("n, g, s", [(3, 0.1, 0.0), (5, 1.0, 1.0), (4, 0.5, 0.5)])
def test_pushed_forward_extremal_solves_euclidean_equation(n, g, s):
    p = make_params(n, g, s)
    c = explicit.normalized_amplitude(p)
    prob = conformal.build_euclidean_problem(p, 0.8)
    r = np.geomspace(1e-3, 0.4, 40)
    h = 1e-4 * r

    def v(x):
        return explicit.extremal_hyperbolic(p, c, x) * conformal.conformal_phi(n, x)

    d1 = (v(r + h) - v(r - h)) / (2 * h)
    d2 = (v(r + h) - 2 * v(r) + v(r - h)) / h ** 2
    assert np.max(np.abs(conformal.euclidean_residual(prob, v(r), d1, d2, r))) < 1e-5


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(-5.0, 5.0), a=st.floats(0.0, 0.3), m=st.floats(-1.5, 1.5))
def test_quadratic_form_transfers(lam, a, m):
    n, g, R = 5, 1.0, 0.5
    params = make_params(n, g, lam=lam)
    grid = radial.geometric_grid(n, R, 1e-8)
    u = radial.smooth_bump(grid, a * R, 0.9 * R, modulation=(m,))
    hyp = variational.rayleigh_hyperbolic(u, params)
    euc = variational.rayleigh_euclidean(conformal.push_forward(u),
                                         conformal.build_euclidean_problem(params, R))
    assert hyp.numerator == pytest.approx(euc.numerator, rel=1e-8, abs=1e-10)
    assert np.sign(hyp.numerator) == np.sign(euc.numerator) or abs(hyp.numerator) < 1e-9
