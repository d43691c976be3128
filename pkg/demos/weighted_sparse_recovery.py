"""
Weighted square-root LASSO on the annulus
=========================================

Sparse recovery of f1 in a grid-orthonormal basis from CS-optimal samples,
with and without the lower-set weights u_i = max |upsilon_i|.
"""
from sparse_sampler import experiments

base = dict(function="f1", domain="D2", dimension=2, basis="ortho", orders=[40],
            schemes=["cs-opt"], m_values=[30, 60, 100], trials=5)

for solver in ("l1", "l1-weighted"):
    records = experiments.run_experiment({**base, "solver": solver})
    for m in base["m_values"]:
        errs = [r.rel_err for r in records if r.m == m]
        gm, _ = experiments.log_stats(errs)
        print(f"{solver:>12}  m = {m:4d}  log-mean error {gm:.2e}")
