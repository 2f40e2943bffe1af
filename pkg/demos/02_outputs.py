# %% [markdown]
# # GNN outputs approach their manifold limit
#
# A single-layer low-pass GNN acts on samples of a bandlimited circle signal.
# Its output is compared with the exact manifold neural network evaluated at
# the same points. A second sweep checks that discrete inner products of
# sampled signals approach their continuum values at the Monte Carlo rate.

# %%
import numpy as np

from manifold_gnn import (
    GnnModel,
    SpectralSignal,
    SweepConfig,
    build_epsilon_graph,
    check_low_pass,
    epsilon_schedule,
    evaluate_signal,
    gnn_forward,
    make_manifold,
    mnn_forward,
    run_output_convergence,
    run_sampling_consistency,
    sample_points,
)

# %% [markdown]
# ## The filter
#
# Heat-basis taps (0, 1) give h(lambda) = exp(-lambda), which decays fast
# enough to count as low-pass on the circle.

# %%
print(check_low_pass([0.0, 1.0], d=1))

# %% [markdown]
# ## One comparison

# %%
manifold = make_manifold("circle", 5)
f = SpectralSignal(manifold, [1.0, 0.8, -0.5, 0.3, 0.2])
model = GnnModel.single([0.0, 1.0], activation="relu", low_pass=True)

for N in (200, 2000):
    pts = sample_points(manifold, N, seed=1)
    L = build_epsilon_graph(pts, 1, epsilon_schedule(N, 1, 1.5), "consistent").laplacian
    y_graph = gnn_forward(model, L, evaluate_signal(f, pts))
    y_mnn = mnn_forward(model, [f], pts)[:, 0]
    err = np.sqrt(np.mean((y_graph - y_mnn) ** 2))
    print(f"N={N:5d}  ||y_N - P_N y|| = {err:.4f}")

# %% [markdown]
# ## Sweep over N
#
# Both the GNN and the bare filter should shrink with N.

# %%
rep = run_output_convergence(SweepConfig(N_list=(125, 250, 500, 1000), seeds=4, M=5, taps=(0.0, 1.0)))
for N, g, h in zip(rep.config["N_list"], rep.means("gnn"), rep.means("filter")):
    print(f"  N={N:5d}  gnn {g:.4f}  filter {h:.4f}")
print(f"gnn pearson {rep.fit.pearson:.3f}  filter pearson {rep.fit_of('filter').pearson:.3f}")

# %% [markdown]
# ## Sampled inner products
#
# The error of <P_N f, P_N g>_N should scale like N^(-1/2).

# %%
rep = run_sampling_consistency(SweepConfig(N_list=(100, 300, 1000, 3000, 10000), seeds=20, M=5))
print(f"slope {rep.fit.slope:.3f} (Monte Carlo rate -0.5)")
