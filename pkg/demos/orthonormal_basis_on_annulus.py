"""
Orthonormal polynomials on an irregular domain
==============================================

Legendre polynomials are orthonormal on the full square but not on the
annulus 1/2 <= |y| <= 1.  A QR factorization of the evaluation matrix on a
random grid fixes that, and the sampling constants show what changes.
"""
import numpy as np

from sparse_sampler import basis, domains, indexsets, measures, ortho
from sparse_sampler.rng import StreamId

# a hyperbolic cross in two variables and a Monte Carlo grid on the annulus
iset = indexsets.hyperbolic_cross(2, 40)
spec = basis.DictionarySpec("legendre", iset)
grid = domains.mc_grid(domains.annulus(2), 10 * len(iset), StreamId(0, "grid"))
print(f"n = {len(iset)} functions, k = {grid.k} grid points, "
      f"acceptance rate {grid.acceptance_rate:.3f}")

B = basis.assemble_eval_matrix(spec, grid.points, "one_over_sqrt_k").values
ob = ortho.orthonormalize(B, spec, grid)

# the raw Legendre Gram matrix on the grid is far from the identity
for label, M in (("legendre", B), ("orthonormalized", ob.Q)):
    rep = measures.constants_report(M)
    print(f"{label:>16}: riesz (a, b) = ({rep.riesz_a:.2e}, {rep.riesz_b:.2f}), "
          f"theta^2 = {rep.theta_sq:.2f}, Theta^2 = {rep.Theta_sq:.1f}")

# the new basis can be evaluated anywhere, not only on the grid
y = np.array([[0.6, 0.0], [0.0, -0.9]])
print("upsilon_0..3 at two points:\n", ob.evaluate(y)[:, :4].round(4))

# Christoffel function: its mean over the grid is exactly n
K = measures.christoffel_on_grid(ob.Q)
print(f"mean K = {K.mean():.6f}, max K = {K.max():.1f}")
