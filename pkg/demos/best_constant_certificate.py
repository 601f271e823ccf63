"""Discrete best constant on a ball against the whole-space threshold.

Run with ``python demos/best_constant_certificate.py``.
"""

from hyhardy import make_params, radial, variational

R = 0.5
params = make_params(5, 1.0, s=1.0, lam=2.0)
thr = variational.hyperbolic_threshold(params)

# Finite elements converge from above, so each value is an upper bound.
for ratio in (1.3, 1.15, 1.08):
    grid = radial.geometric_grid(5, R, r_min=1e-6 * R, ratio=ratio)
    res = variational.minimize_quotient(variational.hyperbolic_form(params, grid))
    print(f"ratio {ratio:4.2f}: {len(grid):4d} nodes  mu = {res.mu_est:.6f}  "
          f"stationarity {res.stationarity:.1e}")
print(f"threshold          = {thr:.6f}")

# Certificates compare a test function quotient with the threshold and
# demand a gap well above the quadrature error.
cases = [
    (make_params(5, 1.0, lam=2.0), 0.5),
    (make_params(5, 1.0, lam=0.5), 0.5),
    (make_params(5, 1.89, lam=5.0), 0.5),
    (make_params(3, 0.1), 0.1),
    (make_params(4, 0.5, lam=0.5), 0.5),
]
print()
for p, radius in cases:
    cert = variational.existence_certificate(p, radius)
    print(f"n={p.n} gamma={p.gamma:<5g} lam={p.lam:<4g} R={radius}: {cert.regime.kind.value:18s} {cert.status}")
