"""
Choosing the number of clusters and subspace dimensions
=======================================================

Sweep a grid of cluster counts and intrinsic dimensions, score every cell
with BIC, and compare with the scree-test rule that picks one dimension per
cluster from the eigenvalue gaps.
"""

from cfunhddc import (
    InitConfig,
    SimSpec,
    build_bspline_basis,
    count_parameters,
    select_model,
    simulate,
    smooth_curves,
)

sample = simulate(SimSpec("dataset2", per_class=100, seed=1))
basis = build_bspline_basis([25, 25], 3, sample.curves.domain)
coeffs = smooth_curves(sample.curves, basis)

# %%
# Model complexity grows with every extra cluster and every extra
# subspace direction.

for K, d in [(3, 2), (4, 2), (4, 4), (5, 2)]:
    print(f"K={K} d={d}: {count_parameters(K, basis.total_size, d).total} free parameters")

# %%
# Grid sweep with a common dimension for all clusters.

report = select_model(coeffs, basis.gram_sqrt, [3, 4, 5], d_grid=[2, 3, 4],
                      init_config=InitConfig(nb_init=3, seed=1))
for c in sorted(report.candidates, key=lambda c: (c.K, c.dims)):
    status = "failed" if c.failed else f"BIC={c.bic:.1f} converged={c.converged}"
    print(f"K={c.K} dims={c.dims}: {status}")
print("chosen:", report.chosen.K, report.chosen.dims)

# %%
# Scree-test dimensions: each threshold yields its own per-cluster choice.

scree = select_model(coeffs, basis.gram_sqrt, [4], cattell_thresholds=[0.1, 0.2],
                     init_config=InitConfig(nb_init=3, seed=1))
for c in scree.candidates:
    print(f"threshold={c.d_setting[0]} dims={c.dims} BIC={c.bic:.1f}")
