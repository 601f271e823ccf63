import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyhardy import BracketError, NonCoerciveError, PreconditionError, RegimeError, exponents, make_params
from hyhardy import conformal, kernels, mass
from hyhardy.conformal import EuclideanProblem
from hyhardy.verify import bessel_mass

BESSEL = [(3, 0.15, 2.0, 1.0, 0.7), (5, 2.0, 3.0, 0.5, 0.8), (4, 0.6, 1.0, 0.0, 1.0)]


@pytest.mark.parametrize("n, g, R", [(3, 0.0, 1.0), (3, 0.2, 0.5), (5, 1.0, 2.0), (4, 0.5, 1.0)])
def test_unperturbed_closed_form(n, g, R):
    p = make_params(n, g)
    rep = mass.euclidean_mass(p, EuclideanProblem.unperturbed(p, R))
    assert rep.mass == pytest.approx(-R ** (-exponents(p).gap), rel=1e-8)
    assert rep.accepted and rep.coercive


@pytest.mark.parametrize("n, g, c, th, R", BESSEL)
def test_bessel_oracle(n, g, c, th, R):
    p = make_params(n, g, theta=th)
    rep = mass.euclidean_mass(p, EuclideanProblem.power(p, R, c, th))
    assert rep.mass == pytest.approx(bessel_mass(p, c, th, R), rel=1e-6)
    assert rep.wronskian_spread < 1e-8
    assert rep.r0_halved_delta < 1e-4


@pytest.mark.parametrize("n, g, c, th, R", BESSEL)
def test_green_solution_positive(n, g, c, th, R):
    p = make_params(n, g, theta=th)
    rep = mass.euclidean_mass(p, EuclideanProblem.power(p, R, c, th))
    r = np.geomspace(rep.r0_used, R, 200)[:-1]
    assert np.all(rep.K(r) > 0)
    assert np.all(rep.k_minus.value(r) > 0)
    assert abs(rep.K(R)) < 1e-8 * abs(rep.k_plus.value(R))


def test_mass_increases_with_radius():
    p = make_params(3, 0.15, theta=1.0)
    radii = np.linspace(0.3, 1.0, 10)
    ms = [mass.euclidean_mass(p, EuclideanProblem.power(p, R, 2.0, 1.0)).mass for R in radii]
    assert np.all(np.diff(ms) > 0)


def test_mass_increases_with_potential():
    p = make_params(3, 0.15, theta=1.0)
    coeffs = np.linspace(0.0, 3.0, 10)
    ms = [mass.euclidean_mass(p, EuclideanProblem.power(p, 0.7, c, 1.0)).mass for c in coeffs]
    assert np.all(np.diff(ms) > 0)


def test_hyperbolic_mass_increases_with_lambda():
    p = make_params(5, 1.89)
    ms = [mass.hyperbolic_mass(p.replace(lam=lam), 0.5).mass_hyperbolic for lam in np.linspace(0, 6, 7)]
    assert np.all(np.diff(ms) > 0)


def test_contamination_slopes():
    n, g, c, th, R = 3, 0.15, 2.0, 1.0, 0.7
    p = make_params(n, g, theta=th)
    prob = EuclideanProblem.power(p, R, c, th)
    exact = bessel_mass(p, c, th, R)
    r0s = R * np.geomspace(1e-2, 1e-5, 7)
    d = exponents(p).gap
    for order in (0, 1):
        cfg = mass.ShootingConfig(correction_order=order)
        err = [abs(mass._mass_once(p, prob, r0, R, cfg)[0] - exact) for r0 in r0s]
        slope = np.polyfit(np.log(r0s), np.log(err), 1)[0]
        predicted = (1 + order) * (2 - th) - d
        assert slope == pytest.approx(predicted, rel=0.2)


@pytest.mark.parametrize("n, g, lam", [(3, 0.2, 0.0), (4, 0.5, 1.0), (5, 1.89, 5.0)])
def test_hyperbolic_expansion_fit(n, g, lam):
    p = make_params(n, g, lam=lam)
    rep = mass.hyperbolic_mass(p, 0.5)
    fit = mass.hyperbolic_expansion_fit(rep, p)
    assert fit.mass_hyperbolic == pytest.approx(rep.mass_hyperbolic, rel=1e-2)


def test_hyperbolic_conversion_factor():
    p = make_params(5, 1.89)
    assert mass.hyperbolic_conversion(p) == pytest.approx(3 ** (-exponents(p).gap / 3), rel=1e-15)


@settings(max_examples=12, deadline=None)
@given(c=st.floats(0.05, 4.0), th=st.floats(0.0, 1.5), R=st.floats(0.3, 1.5))
def test_sign_matches_oracle(c, th, R):
    n, g = 3, 0.2
    p = make_params(n, g, theta=th)
    if not g > 0.25 - (2 - th) ** 2 / 4:
        return
    exact = bessel_mass(p, c, th, R)
    try:
        rep = mass.euclidean_mass(p, EuclideanProblem.power(p, R, c, th))
    except NonCoerciveError:
        return
    if abs(exact) > 1e-6:
        assert np.sign(rep.mass) == np.sign(exact)


def test_regime_refusals():
    p = make_params(5, 0.5, lam=1.0)
    with pytest.raises(RegimeError):
        mass.hyperbolic_mass(p, 0.5)
    q = make_params(5, 1.0, theta=0.0)
    with pytest.raises(RegimeError):
        mass.euclidean_mass(q, EuclideanProblem.power(q, 1.0, 1.0, 0.0))
    with pytest.raises(PreconditionError):
        mass.ShootingConfig(r0=0.1).resolve(1.0)


def test_non_coercive_refused():
    p = make_params(3, 0.2)
    with pytest.raises(NonCoerciveError):
        mass.hyperbolic_mass(p.replace(lam=40.0), 0.5)


def test_lambda_star_postconditions():
    p = make_params(5, 1.89)
    res = mass.lambda_star(p, 0.5)
    assert res.lambda_star == pytest.approx(0.94594, rel=1e-4)
    assert res.mass_below < 0 < res.mass_above
    assert 0 < res.lambda_star < res.eigenvalue
    assert not res.truncated


def test_lambda_star_grows_as_ball_shrinks():
    p = make_params(3, 2 / 9)
    big = mass.lambda_star(p, 0.5, rtol=1e-4).lambda_star
    small = mass.lambda_star(p, 0.3, rtol=1e-4).lambda_star
    assert small > big


def test_lambda_star_bad_bracket():
    p = make_params(5, 1.89)
    with pytest.raises(BracketError):
        mass.lambda_star(p, 0.5, bracket=(2.0, 3.0))
    res = mass.lambda_star(p, 0.5, bracket=(0.0, 100.0), rtol=1e-4)
    assert res.truncated


def test_first_eigenvalue_unperturbed_dimension_three():
    # gamma = 0, n = 3: -Delta_B - lam on B_R has lam_1 = 1 + (pi / rho)^2, rho hyperbolic radius
    R = 0.5
    rho = 2 * np.arctanh(R)
    lam1 = mass.first_dirichlet_eigenvalue(make_params(3, 0.0), R)
    assert lam1 == pytest.approx(1 + (np.pi / rho) ** 2, rel=1e-6)
