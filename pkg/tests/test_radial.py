import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyhardy import DivergenceError, PreconditionError, make_params, sphere_area
from hyhardy import explicit, kernels, radial, variational
from hyhardy.params import critical_exponent, hardy_constant
from hyhardy.radial import Geometry, RadialFunction, Weight


def _euclid(n, R, **kw):
    return radial.geometric_grid(n, R, 1e-8, geometry=Geometry.EUCLIDEAN, **kw)


def test_plain_integral_of_tent():
    grid = _euclid(3, 1.0)
    v = RadialFunction.from_callable(grid, lambda r: 1.0 - r, lambda r: -np.ones_like(r),
                                     dirichlet=True)
    val = radial.integrate_euclidean(v, Weight.plain())
    assert val == pytest.approx(sphere_area(3) / 30.0, rel=1e-10)


def test_gradient_integral_of_tent():
    grid = _euclid(4, 2.0)
    v = RadialFunction.from_callable(grid, lambda r: 2.0 - r, lambda r: -np.ones_like(r),
                                     dirichlet=True)
    assert radial.integrate_euclidean(v, Weight.gradient()) == pytest.approx(
        sphere_area(4) * 2.0 ** 4 / 4, rel=1e-10)


@pytest.mark.parametrize("deg", range(8))
def test_quadrature_polynomial_exactness(deg):
    res = radial.integrate_density(lambda r: r ** deg, np.array([0.3, 0.7, 1.9]), inner_tail=False)
    exact = (1.9 ** (deg + 1) - 0.3 ** (deg + 1)) / (deg + 1)
    assert res.value == pytest.approx(exact, rel=1e-13)


def test_inner_tail_power_law():
    res = radial.integrate_density(lambda r: r ** -0.5, np.geomspace(1e-6, 1.0, 20))
    assert res.value == pytest.approx(2.0, rel=1e-9)


def test_divergent_density_refused():
    with pytest.raises(DivergenceError):
        radial.integrate_density(lambda r: r ** -1.5, np.geomspace(1e-6, 1.0, 20))


def test_flat_profile_has_no_gradient_density():
    grid = radial.geometric_grid(4, 0.9)
    u = radial.smooth_bump(grid, 0.0, 0.8)
    r = np.geomspace(1e-8, 1e-4, 10)
    dens = radial.hyperbolic_density(4, Weight.gradient(), r, u(r), u.deriv(r))
    assert np.all(dens < 1e-12)


def test_refinement_invariance():
    vals = []
    for ratio in (1.05, 1.025):
        grid = radial.geometric_grid(5, 0.95, 1e-8, ratio=ratio)
        u = radial.smooth_bump(grid, 0.1, 0.8, modulation=(0.3,))
        vals.append([radial.integrate_hyperbolic(u, w) for w in
                     (Weight.gradient(), Weight.hardy(), Weight.sobolev(10 / 3))])
    assert np.allclose(vals[0], vals[1], rtol=1e-6)


def test_hyperbolic_grid_inside_ball():
    with pytest.raises(PreconditionError):
        radial.geometric_grid(3, 1.5)
    with pytest.raises(PreconditionError):
        radial.integrate_euclidean(radial.smooth_bump(radial.geometric_grid(3, 0.9), 0.1, 0.5),
                                   Weight.plain())


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 6), a=st.floats(0.0, 0.4), w=st.floats(0.1, 0.5),
       m=st.floats(-1.0, 1.0))
def test_hardy_bound_on_bumps(n, a, w, m):
    grid = radial.geometric_grid(n, 0.99, 1e-9)
    u = radial.smooth_bump(grid, a, min(a + w, 0.95), modulation=(m,))
    q = radial.integrate_hyperbolic(u, Weight.gradient()) / radial.integrate_hyperbolic(u, Weight.hardy())
    assert q >= hardy_constant(n) * (1 - 1e-8)


def test_sigma_transform_roundtrip_and_powers():
    n = 5
    grid = radial.geometric_grid(n, 0.9)
    u = radial.smooth_bump(grid, 0.1, 0.8)
    v = radial.sigma_transform(u)
    r = np.linspace(0.15, 0.75, 13)
    assert np.allclose(v.func(kernels.green_G(n, r)), u(r), rtol=1e-12)
    alpha = 0.7
    g = RadialFunction.from_callable(grid, lambda x: kernels.green_G(n, x) ** alpha)
    sg = radial.sigma_transform(g)
    sig = np.geomspace(0.01, 100, 9)
    assert np.allclose(sg.func(sig), sig ** alpha, rtol=1e-10)


def test_sigma_transform_of_radius_in_dimension_three():
    grid = radial.geometric_grid(3, 0.9)
    lin = radial.sigma_transform(RadialFunction.from_callable(grid, lambda r: r))
    sig = np.geomspace(0.05, 50, 9)
    assert np.allclose(lin.func(sig), kernels.green_G_inverse(3, sig), rtol=1e-12)


@pytest.mark.parametrize("p", [2.0, 10.0 / 3.0, 3.0])
def test_identity_ratio_is_universal(p):
    grid = radial.geometric_grid(5, 0.95, 1e-8)
    c = radial.metric_constant(5)
    for bump in (radial.smooth_bump(grid, 0.05, 0.7, modulation=(0.4, -1.0)),
                 radial.smooth_bump(grid, 0.2, 0.9, amplitude=3.0)):
        vp, grad = radial.identity_ratio(bump, p)
        assert vp == pytest.approx(c, rel=1e-6)
        assert grad == pytest.approx(c, rel=1e-6)


def test_identity_needs_interior_support():
    grid = radial.geometric_grid(3, 1.0, closed=False)
    u = RadialFunction.from_callable(grid, lambda r: 1 - r * r, lambda r: -2 * r)
    with pytest.raises(PreconditionError):
        radial.identity_ratio(u, 2.0)


def test_extremal_quotient_on_whole_ball():
    n = 5
    p = make_params(n, 1.0, 0.0)
    c = explicit.normalized_amplitude(p)
    grid = radial.geometric_grid(n, 1.0, 1e-10, closed=False)
    u = RadialFunction.from_callable(grid, lambda r: explicit.extremal_hyperbolic(p, c, r),
                                     lambda r: explicit.extremal_hyperbolic_derivative(p, c, r))
    num = radial.integrate_hyperbolic(u, Weight.gradient()) - p.gamma * radial.integrate_hyperbolic(
        u, Weight.hardy())
    den = radial.integrate_hyperbolic(u, Weight.sobolev(p.p)) ** (2 / p.p)
    assert num / den == pytest.approx(variational.hyperbolic_threshold(p), rel=1e-4)


def test_euclidean_hardy_integrable_for_singular_profile():
    p = make_params(3, 0.2)
    from hyhardy import exponents
    bm = exponents(p).beta_minus
    grid = _euclid(3, 1.0)
    v = RadialFunction.from_callable(grid, lambda r: r ** -bm - 1.0, lambda r: -bm * r ** (-bm - 1),
                                     dirichlet=True)
    val = radial.integrate_euclidean(v, Weight.euclidean_hardy())
    assert math.isfinite(val) and val > 0
    zero = RadialFunction.from_callable(grid, lambda r: 0 * r, lambda r: 0 * r, dirichlet=True)
    assert radial.integrate_euclidean(zero, Weight.euclidean_hardy()) == 0.0


def test_sobolev_weight_uses_critical_exponent():
    n, s = 4, 1.0
    grid = radial.geometric_grid(n, 0.9)
    u = radial.smooth_bump(grid, 0.1, 0.6)
    a = radial.integrate_hyperbolic(u, Weight.sobolev(critical_exponent(n, s)))
    b = radial.integrate_hyperbolic(u, Weight.sobolev(critical_exponent(n, 0.0)))
    assert a > 0 and b > 0 and a != b
