# %% [markdown]
# # Graph Laplacian spectra on a sampled circle
#
# Sample points uniformly on the unit circle, connect every pair closer than
# epsilon, and compare the low end of the graph Laplacian spectrum with the
# analytic one. On the circle the manifold eigenvalues are k^2 with
# multiplicity two, scaled by c_rho = 1/(4 pi) for the uniform density.

# %%
import math

import numpy as np

from manifold_gnn import (
    SweepConfig,
    build_epsilon_graph,
    check_weyl,
    eigendecompose,
    epsilon_schedule,
    make_manifold,
    run_spectrum_convergence,
    sample_points,
)

# %% [markdown]
# ## One graph
#
# With the consistent kernel normalization the graph Laplacian converges to
# the density-weighted Laplacian, whose eigenvalues are c_rho k^2.

# %%
N = 2000
eps = epsilon_schedule(N, d=1, c=1.5)
graph = build_epsilon_graph(sample_points("circle", N, seed=0), 1, eps, "consistent")
dec = eigendecompose(graph.laplacian, 9)
circle = make_manifold("circle", 9)

print(f"N={N}  eps={eps:.4f}  edges={graph.n_edges}")
for i, (lam_N, lam) in enumerate(zip(dec.eigenvalues, circle.eigenvalues)):
    print(f"  i={i}  graph {lam_N:8.4f}  manifold {lam:8.4f}")

# %% [markdown]
# ## Eigenvalue ratios
#
# lambda_N / k^2 should be flat in k and close to 1/(4 pi).

# %%
k = np.repeat(np.arange(1, 5), 2)
ratios = dec.eigenvalues[1:9] / k**2
print("ratios", np.round(ratios, 4), " 1/(4 pi) =", round(1 / (4 * math.pi), 4))

# %% [markdown]
# ## Convergence in N
#
# Relative error of the first nonzero eigenvalue, averaged over seeds, and its
# log-log fit.

# %%
rep = run_spectrum_convergence(SweepConfig(N_list=(250, 500, 1000, 2000), seeds=4, K=9))
for row in rep.summary:
    print(f"  N={row.N:5d}  relerr={row.mean:.4f} +/- {row.stderr:.4f}")
print(f"slope {rep.fit.slope:.3f}  pearson {rep.fit.pearson:.3f}")

# %% [markdown]
# ## Weyl's law
#
# Analytic eigenvalues grow like i^(2/d).

# %%
for kind in ("circle", "sphere"):
    print(f"{kind}: fitted exponent {check_weyl(kind, 100).slope:.3f}")
