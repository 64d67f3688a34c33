"""
Self-consistent stationary laws
===============================

A self-interacting walker is stationary when the occupation measure it
generates reproduces the rates that generated it: pi must be the stationary
law of Q(pi).  This demo solves that fixed-point problem for the built-in
families and verifies a case with a known closed form.
"""

import numpy as np

from selfjump import core, ldp

# reinforcement on state 1 only: q0 = [[-2, 2], [1, -1]], strength 1.
# the self-consistency condition reduces to a quadratic with root
# pi_1 = 2 - sqrt(3)
field = core.RateField.autochemotaxis(np.array([[-2.0, 2.0], [1.0, -1.0]]),
                                      strength=1.0)
fp = ldp.fixed_point_pi_star(field)
exact = 2.0 - np.sqrt(3.0)
print("autochemotaxis, closed-form check:")
print(f"  iterate: pi_1 = {fp.pi[0]:.12f} ({fp.iterations} damped iterations)")
print(f"  exact:   pi_1 = {exact:.12f}")
print(f"  residual |pi - stationary(Q(pi))| = {fp.residual:.2e}")

# the equilibrium flux at pi* balances edge by edge
flux = ldp.equilibrium_flux(field, fp.pi)
print(f"  equilibrium flux: 1->2 {flux[0, 1]:.6f}, 2->1 {flux[1, 0]:.6f}")

# congestion: rates are damped by crowding, one fixed point
cong = core.RateField.congestion(np.array([[-2.0, 2.0], [1.0, -1.0]]),
                                 alpha=np.array([0.3, 0.2]),
                                 beta=np.array([0.1, 0.4]))
fp = ldp.fixed_point_pi_star(cong)
print(f"\ncongestion: pi* = [{fp.pi[0]:.6f}, {fp.pi[1]:.6f}], "
      f"converged={fp.converged}")

# catalytic mixtures interpolate between generators
cata = core.RateField.catalytic(np.stack([
    np.array([[-1.0, 1.0], [2.0, -2.0]]),
    np.array([[-3.0, 3.0], [0.5, -0.5]])]))
fp = ldp.fixed_point_pi_star(cata)
print(f"catalytic:  pi* = [{fp.pi[0]:.6f}, {fp.pi[1]:.6f}], "
      f"converged={fp.converged}")

# a multistart sweep reports every distinct self-consistent law it finds;
# for two-state affine reinforcement the fixed point is unique, and the
# sweep confirms that every start lands on the same law
strong = core.RateField.autochemotaxis(np.array([[-1.0, 1.0], [1.0, -1.0]]),
                                       strength=3.0)
roots = ldp.fixed_point_multistart(strong, n_starts=12, seed=0)
print(f"\nstrong reinforcement, 12 starts, {len(roots)} distinct fixed "
      f"point(s):")
for r in roots:
    print(f"  pi = [{r.pi[0]:.6f}, {r.pi[1]:.6f}]  residual {r.residual:.1e}")
