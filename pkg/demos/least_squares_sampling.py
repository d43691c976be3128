"""
Monte Carlo versus optimal sampling for least squares
=====================================================

With m close to s log s, Monte Carlo samples leave the weighted least-squares
problem badly conditioned while samples drawn from the Christoffel density
keep it stable.  alpha_hat is the smallest squared singular value of the
normalized design matrix.
"""
import numpy as np

from sparse_sampler import basis, domains, experiments, indexsets, lsq, measures, ortho
from sparse_sampler.rng import StreamId

s = 50
iset = indexsets.total_degree(1, s - 1)
grid = domains.mc_grid(domains.hypercube(1), 30 * s, StreamId(0, "grid"))
ob = ortho.orthonormalize_dictionary(basis.DictionarySpec("legendre", iset), grid)
m = experiments.m_slogs(s)
f = experiments.f1(grid.points)

plans = {"mc": measures.mc_plan(grid), "optimal": measures.ls_optimal_plan(ob.Q)}
for name, plan in plans.items():
    alphas, errs = [], []
    for t in range(20):
        smp = measures.draw(plan, m, StreamId(0, name, (t,)), grid)
        A, V = lsq.assemble_ls(smp, ob.dictionary(), f[smp.point_ids])
        fit = lsq.solve_ls(A, V)
        alphas.append(fit.alpha_hat)
        errs.append(experiments.relative_linf_error(f, ob.grid_values @ fit.coefficients[:, 0]))
    gm, gs = experiments.log_stats(errs)
    print(f"{name:>8}: m = {m}, median alpha_hat = {np.median(alphas):.2e}, "
          f"log-mean error = {gm:.2e} (x/ {gs:.1f})")

# hierarchical draws grow with the basis: the points for the first 10
# functions are a prefix of those for all 50
small = measures.ls_hierarchical_draw(ob.Q[:, :10], 40, StreamId(1, "h"), grid)
big = measures.ls_hierarchical_draw(ob.Q, 200, StreamId(1, "h"), grid)
print("nested:", np.array_equal(small.point_ids, big.point_ids[:40]))
