"""Radial grids and functions, singular quadrature and the ``sigma = G(r)`` line.

Every integral is reduced to ``omega_{n-1} * int density(r) dr``.  Densities
are integrated by composite Gauss-Legendre rules on the grid cells with
adaptive bisection; the piece ``(0, r_1)`` below the first node is handled
by fitting a power law to the density and integrating it in closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import kernels
from .errors import ConsistencyError, DivergenceError, PreconditionError
from .params import sphere_area

__all__ = [
    "Geometry",
    "RadialGrid",
    "RadialFunction",
    "SigmaFunction",
    "WeightKind",
    "Weight",
    "geometric_grid",
    "uniform_grid",
    "integrate_density",
    "integrate_sigma_line",
    "integrate_hyperbolic",
    "integrate_euclidean",
    "hyperbolic_density",
    "euclidean_density",
    "sigma_transform",
    "identity_ratio",
    "smooth_bump",
    "metric_constant",
]

_GL_CACHE = {}


def gauss_legendre(order):
    """Nodes and weights on [0, 1]."""
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[order]


class Geometry(enum.Enum):
    HYPERBOLIC = "hyperbolic"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii in ``(0, r_max]``.

    For the hyperbolic geometry ``r_max <= 1`` is the Euclidean radius of a
    centred ball of the Poincare model.
    """

    geometry: Geometry
    n: int
    nodes: np.ndarray
    r_max: float
    scheme: str = "geometric"
    ratio: float | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise PreconditionError("a grid needs at least two nodes")
        if nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise PreconditionError("grid nodes must be positive and strictly increasing")
        if nodes[-1] > self.r_max * (1 + 1e-15):
            raise PreconditionError("grid nodes exceed r_max")
        if self.geometry is Geometry.HYPERBOLIC and self.r_max > 1:
            raise PreconditionError("hyperbolic grids live inside the unit ball")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def __len__(self):
        return self.nodes.size

    @property
    def closed(self):
        """True when the last node sits on ``r_max`` (Dirichlet grids)."""
        return bool(self.nodes[-1] == self.r_max)


def geometric_grid(n, r_max, r_min=1e-8, ratio=1.05, geometry=Geometry.HYPERBOLIC,
                   closed=True, max_spacing=None, boundary_refine=0.0):
    """Geometric grid from ``r_min`` towards ``r_max``.

    Spacing grows by ``ratio`` from the origin but never exceeds
    ``max_spacing`` (default ``r_max / 40``).  ``boundary_refine`` > 0 adds
    nodes clustering geometrically towards ``r_max`` down to that distance.
    """
    if not 0 < r_min < r_max:
        raise PreconditionError("need 0 < r_min < r_max")
    if ratio <= 1:
        raise PreconditionError("ratio must exceed 1")
    h_max = r_max / 40.0 if max_spacing is None else max_spacing
    nodes = [r_min]
    while True:
        step = min(nodes[-1] * (ratio - 1.0), h_max)
        nxt = nodes[-1] + step
        if nxt >= r_max * (1 - 1e-12):
            break
        nodes.append(nxt)
    nodes = np.array(nodes)
    if boundary_refine > 0:
        gaps = r_max - np.geomspace(min(h_max, r_max - nodes[-1]), boundary_refine, 60)
        nodes = np.union1d(nodes, gaps[(gaps > nodes[0]) & (gaps < r_max)])
    if closed:
        nodes = np.append(nodes, r_max)
        if nodes[-1] - nodes[-2] < 1e-3 * (nodes[-2] - nodes[-3]):
            nodes = np.delete(nodes, -2)
    return RadialGrid(geometry, int(n), nodes, float(r_max), "geometric", float(ratio))


def uniform_grid(n, r_max, count, geometry=Geometry.HYPERBOLIC, closed=True):
    nodes = np.linspace(0.0, r_max, count + 1)[1:]
    if not closed:
        nodes = nodes[:-1]
    return RadialGrid(geometry, int(n), nodes, float(r_max), "uniform", None)


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """A radial profile sampled on a grid.

    When ``func`` (and optionally ``dfunc``) are given they are the
    authoritative evaluators and the node samples are informational.
    Otherwise evaluation interpolates: cubic Hermite when derivatives are
    stored, piecewise linear otherwise.  Below the first node the profile is
    extended by its first value, beyond ``r_max`` a Dirichlet profile is 0.
    """

    grid: RadialGrid
    values: np.ndarray
    derivative: np.ndarray | None = None
    func: Callable | None = None
    dfunc: Callable | None = None
    dirichlet: bool = False
    support: tuple[float, float] | None = None
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise PreconditionError("values must match the grid nodes")
        if not np.all(np.isfinite(values)):
            raise PreconditionError("radial function values must be finite")
        if self.dirichlet:
            if not self.grid.closed:
                raise PreconditionError("a Dirichlet function needs a node at r_max")
            if values[-1] != 0.0:
                raise PreconditionError("a Dirichlet function must vanish at r_max")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.derivative is not None:
            der = np.asarray(self.derivative, dtype=float)
            der.setflags(write=False)
            object.__setattr__(self, "derivative", der)
            if self.func is None:
                object.__setattr__(
                    self, "_spline", CubicHermiteSpline(self.grid.nodes, values, der)
                )

    @property
    def n(self):
        return self.grid.n

    @classmethod
    def from_callable(cls, grid, func, dfunc=None, dirichlet=False, support=None):
        values = np.asarray(func(grid.nodes), dtype=float)
        if dirichlet:
            values = values.copy()
            values[-1] = 0.0
        der = None if dfunc is None else np.asarray(dfunc(grid.nodes), dtype=float)
        return cls(grid, values, der, func, dfunc, dirichlet, support)

    @classmethod
    def from_values(cls, grid, values, dirichlet=True):
        return cls(grid, np.asarray(values, dtype=float), dirichlet=dirichlet)

    @property
    def piecewise_linear(self):
        return self.func is None and self.derivative is None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.func is not None:
            out = np.asarray(self.func(r), dtype=float)
        elif self._spline is not None:
            out = self._spline(np.clip(r, self.grid.nodes[0], self.grid.nodes[-1]))
        else:
            out = np.interp(r, self.grid.nodes, self.values)
        if self.dirichlet:
            out = np.where(r >= self.grid.r_max, 0.0, out)
        return out

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        if self.dfunc is not None:
            out = np.asarray(self.dfunc(r), dtype=float)
        elif self.func is not None:
            h = 1e-6 * np.maximum(r, 1e-300)
            out = (np.asarray(self.func(r + h)) - np.asarray(self.func(r - h))) / (2 * h)
        elif self._spline is not None:
            out = self._spline(r, 1)
            out = np.where((r < self.grid.nodes[0]) | (r > self.grid.nodes[-1]), 0.0, out)
        else:
            nodes = self.grid.nodes
            slopes = np.diff(self.values) / np.diff(nodes)
            idx = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, slopes.size - 1)
            out = np.where((r < nodes[0]) | (r > nodes[-1]), 0.0, slopes[idx])
        if self.dirichlet:
            out = np.where(r >= self.grid.r_max, 0.0, out)
        return out

    def with_values(self, values):
        return RadialFunction(self.grid, values, dirichlet=self.dirichlet)

    def breakpoints(self):
        pts = [self.grid.nodes]
        if self.support is not None:
            pts.append(np.array([x for x in self.support if x > 0]))
        return np.unique(np.concatenate(pts))


@dataclass(frozen=True)
class SigmaFunction:
    """``v(sigma) = u(G^{-1}(sigma))`` sampled on increasing ``sigma``."""

    n: int
    sigma: np.ndarray
    values: np.ndarray
    derivative: np.ndarray | None = None
    func: Callable | None = None
    dfunc: Callable | None = None


class WeightKind(enum.Enum):
    GRADIENT = "gradient"
    HARDY_V2 = "hardy_v2"
    SOBOLEV_VP = "sobolev_vp"
    PLAIN = "plain"
    EUCLIDEAN_HARDY = "euclidean_hardy"
    EUCLIDEAN_HS = "euclidean_hs"
    EUCLIDEAN_PERTURBATION = "euclidean_perturbation"


@dataclass(frozen=True)
class Weight:
    kind: WeightKind
    p: float | None = None
    s: float | None = None
    h: Callable | None = None
    b: Callable | None = None

    @classmethod
    def gradient(cls):
        return cls(WeightKind.GRADIENT)

    @classmethod
    def hardy(cls):
        return cls(WeightKind.HARDY_V2)

    @classmethod
    def sobolev(cls, p):
        return cls(WeightKind.SOBOLEV_VP, p=float(p))

    @classmethod
    def plain(cls):
        return cls(WeightKind.PLAIN)

    @classmethod
    def euclidean_hardy(cls):
        return cls(WeightKind.EUCLIDEAN_HARDY)

    @classmethod
    def euclidean_hs(cls, s, p, b=None):
        return cls(WeightKind.EUCLIDEAN_HS, p=float(p), s=float(s), b=b)

    @classmethod
    def perturbation(cls, h):
        return cls(WeightKind.EUCLIDEAN_PERTURBATION, h=h)


def metric_constant(n):
    """``omega_{n-1} 2^(n-2)``: the factor between ball and sigma-line integrals."""
    return sphere_area(n) * 2.0 ** (n - 2)


def hyperbolic_density(n, weight, r, u, du=None):
    """Density ``g`` with ``int_B ... dv = omega_{n-1} int g(r) dr``."""
    kind = weight.kind
    if kind is WeightKind.GRADIENT:
        logf = (n - 2) * np.log1p(-r * r) - (n - 1) * np.log(r)
        return 2.0 ** (n - 2) * du * du * np.exp(-logf)
    if kind is WeightKind.PLAIN:
        return np.exp(n * (math.log(2.0) - np.log1p(-r * r)) + (n - 1) * np.log(r)) * u * u
    if kind in (WeightKind.HARDY_V2, WeightKind.SOBOLEV_VP):
        p = 2.0 if kind is WeightKind.HARDY_V2 else weight.p
        logf = (n - 2) * np.log1p(-r * r) - (n - 1) * np.log(r)
        logg = kernels.log_green_G(n, r)
        scale = 2.0 ** (n - 2) / (n - 2) ** 2
        return scale * np.exp(logf - 0.5 * (p + 2) * logg) * np.abs(u) ** p
    raise PreconditionError(f"weight {kind.value} is not a hyperbolic weight")


def euclidean_density(n, weight, r, u, du=None):
    """Density ``g`` with ``int_{B_R} ... dx = omega_{n-1} int g(r) dr``."""
    kind = weight.kind
    rn = r ** (n - 1)
    if kind is WeightKind.GRADIENT:
        return rn * du * du
    if kind is WeightKind.PLAIN:
        return rn * u * u
    if kind is WeightKind.EUCLIDEAN_HARDY:
        return r ** (n - 3) * u * u
    if kind is WeightKind.EUCLIDEAN_HS:
        b = 1.0 if weight.b is None else weight.b(r)
        return b * r ** (n - 1 - weight.s) * np.abs(u) ** weight.p
    if kind is WeightKind.EUCLIDEAN_PERTURBATION:
        return weight.h(r) * rn * u * u
    raise PreconditionError(f"weight {kind.value} is not a Euclidean weight")


@dataclass
class QuadratureResult:
    value: float
    error: float
    cells: int
    tail: float


def _cell_rules(fun, a, b, order):
    x, w = gauss_legendre(order)
    width = b - a
    pts = a[:, None] + width[:, None] * x[None, :]
    vals = fun(pts.ravel()).reshape(pts.shape)
    return (vals * w[None, :]).sum(axis=1) * width


def integrate_density(fun, breaks, rtol=1e-10, order=10, max_rounds=40, max_cells=400000,
                      inner_tail=True):
    """Adaptive composite Gauss-Legendre integral of ``fun`` over ``(0, breaks[-1])``.

    ``fun`` must be vectorized.  Cells whose ``order`` and ``2*order`` rules
    disagree are bisected until the summed disagreement is below
    ``rtol * |integral|``.  With ``inner_tail`` the interval ``(0, breaks[0])``
    is added by a power-law fit on ``[breaks[0]/4, breaks[0]]``; a fitted
    exponent ``<= -1`` raises :class:`DivergenceError`.
    """
    breaks = np.unique(np.asarray(breaks, dtype=float))
    a, b = breaks[:-1], breaks[1:]
    total = err_total = 0.0
    done_val = np.zeros(0)
    done_err = np.zeros(0)
    for _ in range(max_rounds):
        coarse = _cell_rules(fun, a, b, order)
        fine = _cell_rules(fun, a, b, 2 * order)
        err = np.abs(fine - coarse)
        total = done_val.sum() + fine.sum()
        err_total = done_err.sum() + err.sum()
        if not np.isfinite(total):
            raise DivergenceError("integrand is not finite on the quadrature nodes")
        scale = max(abs(total), np.abs(done_val).sum() * 1e-3, 1e-300)
        if err_total <= rtol * scale or a.size > max_cells:
            break
        bad = err > rtol * scale / max(a.size, 1) * 0.5
        done_val = np.concatenate([done_val, fine[~bad]])
        done_err = np.concatenate([done_err, err[~bad]])
        mid = 0.5 * (a[bad] + b[bad])
        a, b = np.concatenate([a[bad], mid]), np.concatenate([mid, b[bad]])
        if a.size == 0:
            break
    tail = 0.0
    if inner_tail:
        r1 = breaks[0]
        g1, g2, g3 = fun(np.array([r1, r1 / 2.0, r1 / 4.0]))
        if g1 != 0.0 and g2 != 0.0 and np.sign(g1) == np.sign(g2):
            q = math.log2(g1 / g2)
            if q <= -1.0:
                raise DivergenceError(
                    f"density behaves like r^{q:.3f} near 0; the integral diverges"
                )
            tail = g1 * r1 / (q + 1.0)
            if g3 != 0.0 and np.sign(g3) == np.sign(g2):
                q2 = math.log2(g2 / g3)
                if q2 > -1.0:
                    err_total += abs(tail - g2 * (r1 / 2.0) / (q2 + 1.0) * 2.0 ** (q2 + 1.0))
    return QuadratureResult(float(total + tail), float(err_total), int(a.size), float(tail))


def _sampling_breaks(u, r_hi):
    pts = u.breakpoints()
    pts = pts[pts <= r_hi]
    if pts[-1] < r_hi:
        pts = np.append(pts, r_hi)
    return pts


def _evaluators(u):
    if u.piecewise_linear:
        nodes = u.grid.nodes
        slopes = np.diff(u.values) / np.diff(nodes)

        def val(r):
            return np.interp(r, nodes, u.values)

        def der(r):
            idx = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, slopes.size - 1)
            return np.where(r < nodes[0], 0.0, slopes[idx])

        return val, der
    return u, u.deriv


def _integrate(u, weight, density, rtol, full):
    n = u.n
    r_hi = u.grid.r_max
    if u.support is not None:
        r_hi = min(r_hi, u.support[1])
    val, der = _evaluators(u)
    needs_der = weight.kind is WeightKind.GRADIENT

    def fun(r):
        return density(n, weight, r, val(r), der(r) if needs_der else None)

    breaks = _sampling_breaks(u, r_hi)
    inner = True
    if u.support is not None and u.support[0] > 0:
        breaks = breaks[breaks >= u.support[0]]
        inner = False
    res = integrate_density(fun, breaks, rtol=rtol, inner_tail=inner)
    res.value *= sphere_area(n)
    res.error *= sphere_area(n)
    return res if full else res.value


def integrate_hyperbolic(u, weight, rtol=1e-10, full=False):
    """``int_{B} (weighted integrand of u) dv`` in the Poincare metric."""
    if u.grid.geometry is not Geometry.HYPERBOLIC:
        raise PreconditionError("integrate_hyperbolic needs a hyperbolic grid")
    return _integrate(u, weight, hyperbolic_density, rtol, full)


def integrate_euclidean(v, weight, rtol=1e-10, full=False):
    """``int_{B_R} (weighted integrand of v) dx`` in the flat metric."""
    if v.grid.geometry is not Geometry.EUCLIDEAN:
        raise PreconditionError("integrate_euclidean needs a Euclidean grid")
    return _integrate(v, weight, euclidean_density, rtol, full)


def integrate_sigma_line(fun, lo, hi=np.inf, rtol=1e-11, per_decade=4):
    """``int_lo^hi fun(sigma) d sigma`` with ``sigma = e^y`` substitution.

    For ``hi = inf`` the range is truncated once the integrand (in ``y``)
    falls below 1e-16 of its peak and the remaining tail is added from a
    power-law fit.
    """
    if hi == np.inf:
        y_lo = math.log(lo)
        span = 1.0
        while True:
            ys = np.linspace(y_lo, y_lo + span, 64)
            g = np.abs(fun(np.exp(ys)) * np.exp(ys))
            peak = g.max()
            if peak == 0 or g[-1] < 1e-16 * peak:
                break
            span *= 2.0
            if span > 2000:
                raise DivergenceError("sigma-line integrand does not decay")
        y_hi = y_lo + span
    else:
        y_lo, y_hi = math.log(lo), math.log(hi)
    ncell = max(8, int((y_hi - y_lo) * per_decade / math.log(10.0)) + 1)
    breaks = np.linspace(y_lo, y_hi, ncell + 1)

    def in_y(y):
        s = np.exp(y)
        return fun(s) * s

    res = integrate_density(in_y, breaks, rtol=rtol, inner_tail=False)
    value = res.value
    if hi == np.inf:
        y1, y2 = y_hi - 1.0, y_hi
        g1, g2 = in_y(np.array([y1, y2]))
        if g1 > 0 and g2 > 0 and g2 < g1:
            k = math.log(g1 / g2)
            value += g2 / k
    return value


def sigma_transform(u):
    """Change of variable ``sigma = G(r)``, ``v(sigma) = u(r)``."""
    n = u.n
    r = u.grid.nodes
    if u.grid.closed and u.grid.r_max == 1.0:
        r = r[:-1]
    sig = kernels.green_G(n, r)
    vals = np.asarray(u(r), dtype=float)
    der = -np.asarray(u.deriv(r)) / kernels.f_weight(n, r)
    order = np.argsort(sig)

    def func(s):
        return u(kernels.green_G_inverse(n, s))

    def dfunc(s):
        rr = kernels.green_G_inverse(n, s)
        return -u.deriv(rr) / kernels.f_weight(n, rr)

    return SigmaFunction(n, sig[order], vals[order], der[order], func, dfunc)


def _sigma_integrals(u, p):
    n = u.n
    v = sigma_transform(u)
    a, b = (0.0, u.grid.r_max) if u.support is None else u.support
    lo = kernels.green_G(n, min(b, 1.0)) if b < 1.0 else 0.0
    if lo <= 0.0:
        raise PreconditionError("identity checks need profiles supported away from r = 1")
    hi = np.inf if a <= 0 else kernels.green_G(n, a)
    grad = integrate_sigma_line(lambda s: v.dfunc(s) ** 2, lo, hi)
    pw = integrate_sigma_line(lambda s: np.abs(v.func(s)) ** p * s ** (-(p + 2) / 2.0), lo, hi)
    return grad, pw / (n - 2) ** 2


def identity_ratio(u, p, rtol=1e-5):
    """Ratios of ball integrals to their sigma-line counterparts.

    Returns ``(vp_ratio, gradient_ratio)``.  Both equal the universal
    constant ``omega_{n-1} 2^(n-2)``, independent of ``u`` and ``p``; a
    disagreement beyond ``rtol`` raises :class:`ConsistencyError`.
    """
    grad_line, vp_line = _sigma_integrals(u, p)
    vp_ball = integrate_hyperbolic(u, Weight.sobolev(p))
    grad_ball = integrate_hyperbolic(u, Weight.gradient())
    vp_ratio = vp_ball / vp_line
    grad_ratio = grad_ball / grad_line
    if abs(vp_ratio - grad_ratio) > rtol * abs(grad_ratio):
        raise ConsistencyError(
            f"integral identities disagree: V_p ratio {vp_ratio!r}, gradient ratio {grad_ratio!r}"
        )
    return vp_ratio, grad_ratio


def smooth_bump(grid, a, b, amplitude=1.0, modulation=()):
    """``C^inf`` profile supported on ``[a, b]`` (``a = 0`` keeps it flat at 0).

    ``modulation`` holds polynomial coefficients in ``(r - a)/(b - a)`` that
    multiply the bump, which gives cheap families of distinct test functions.
    """
    if not 0 <= a < b:
        raise PreconditionError("need 0 <= a < b")
    coeffs = np.asarray((1.0,) + tuple(modulation), dtype=float)
    dcoeffs = np.polynomial.polynomial.polyder(coeffs)
    width = b - a

    def core(r):
        if a == 0:
            x = np.clip(r / b, 0.0, 1.0)
            inside = x < 1
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                e = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - x * x)), 0.0)
                de = np.where(inside, e * (-2.0 * x / (1.0 - x * x) ** 2) / b, 0.0)
            return e, de
        x = (r - a) / width
        inside = (x > 0) & (x < 1)
        y = 2.0 * x - 1.0
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            e = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - y * y)), 0.0)
            de = np.where(inside, e * (-2.0 * y / (1.0 - y * y) ** 2) * 2.0 / width, 0.0)
        return e, de

    def func(r):
        r = np.asarray(r, dtype=float)
        e, _ = core(r)
        x = (r - a) / width
        return amplitude * e * np.polynomial.polynomial.polyval(x, coeffs)

    def dfunc(r):
        r = np.asarray(r, dtype=float)
        e, de = core(r)
        x = (r - a) / width
        poly = np.polynomial.polynomial.polyval(x, coeffs)
        dpoly = np.polynomial.polynomial.polyval(x, dcoeffs) / width
        return amplitude * (de * poly + e * dpoly)

    return RadialFunction.from_callable(grid, func, dfunc, support=(a, b))
