"""Radial kernels of the Poincare ball and the sharp Hardy constant.

Run with ``python demos/kernels_and_hardy.py``.
"""

import numpy as np

from hyhardy import hardy_constant, kernels, radial, variational

# G is the radial Green function of the hyperbolic Laplacian, normalised so
# that G(r) ~ r^{2-n}/(n-2) at the origin and G(1) = 0.
n = 5
r = np.geomspace(1e-3, 0.99, 6)
print("   r          f(r)          G(r)         V_2(r)")
for ri, f, g, v in zip(r, kernels.f_weight(n, r), kernels.green_G(n, r), kernels.weight_V_p(n, 2.0, r)):
    print(f"{ri:8.4f}  {f:12.5e}  {g:12.5e}  {v:12.5e}")

# Ball integrals reduce to integrals on the sigma = G(r) half line, up to a
# single dimensional constant.
grid = radial.geometric_grid(n, 0.95, 1e-8)
u = radial.smooth_bump(grid, 0.05, 0.7, modulation=(0.4, -1.0))
vp, grad = radial.identity_ratio(u, 10 / 3)
print(f"\nball / sigma-line ratios: {vp:.10f} {grad:.10f}")
print(f"metric constant:          {radial.metric_constant(n):.10f}")

# The discrete Hardy quotient approaches (n-2)^2/4 from above as the inner
# radius of the grid shrinks; the continuum infimum is not attained.
for n in (3, 4, 5):
    for r_min in (1e-6, 1e-10, 1e-14):
        g = radial.geometric_grid(n, 0.9, r_min=r_min, ratio=1.1)
        val = variational.hardy_quotient_minimum(n, g)
        print(f"n={n} r_min={r_min:.0e}: min quotient / gamma_H = {val / hardy_constant(n):.5f}")
