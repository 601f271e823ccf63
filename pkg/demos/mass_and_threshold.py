"""The mass of a Hardy-Schrodinger operator on a hyperbolic ball.

Run with ``python demos/mass_and_threshold.py``.
"""

import numpy as np

from hyhardy import conformal, make_params, mass, variational

# Low dimensional regime: n = 3 with gamma above the split value 0.
params = make_params(3, 2 / 9)
R = 0.5

print(" lam      hyperbolic mass   r0-halving change")
for lam in np.linspace(0.0, 4.0, 9):
    rep = mass.hyperbolic_mass(params.replace(lam=lam), R)
    print(f"{lam:4.1f}  {rep.mass_hyperbolic:16.8f}   {rep.r0_halved_delta:.2e}")

# The mass increases with lam and changes sign at lam*; below the first
# Dirichlet eigenvalue the operator stays coercive.
star = mass.lambda_star(params, R)
print(f"\nlam* = {star.lambda_star:.6f}   first eigenvalue = {star.eigenvalue:.6f}")

# Above lam* the mass is positive and the corrected bubbles beat the
# threshold by an amount proportional to eps^(beta_+ - beta_-).
p = params.replace(lam=4.0)
rep = mass.hyperbolic_mass(p, R)
prob = conformal.build_euclidean_problem(p, R)
fit = variational.case2_expansion_fit(p, prob, rep, eps0=1e-5)
print("\nthreshold - J(u_eps) ~ C eps^k")
print(f"fitted k = {fit.slope:.4f}   expected {fit.predicted_slope:.4f}")
print(f"fitted C = {fit.coefficient:.4f}   expected {fit.predicted_coefficient:.4f}")
