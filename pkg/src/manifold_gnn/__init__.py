"""Graph neural networks on epsilon-graphs sampled from manifolds.

Build epsilon-graphs from points on analytic manifolds, run spectral GNNs next
to their manifold-limit counterparts, and measure convergence rates and
generalization gaps.
"""

__version__ = "0.1.0"

from .filters import (
    FilterCoeffs,
    activation_apply,
    check_low_pass,
    frequency_response,
    graph_filter_apply,
)
from .gnn import GnnModel, gnn_forward, gnn_gradient, load_model, loss_and_gradient, save_model
from .graphs import (
    EpsilonGraph,
    SpectralDecomposition,
    build_epsilon_graph,
    discrete_inner_product,
    eigendecompose,
    epsilon_schedule,
    graph_laplacian,
)
from .manifolds import (
    ManifoldModel,
    PointSample,
    SpectralSignal,
    evaluate_signal,
    make_manifold,
    manifold_filter_apply,
    mnn_forward,
    sample_points,
)
from .fitting import LinearFit, linear_fit, loglog_fit, pearson
from .training import RiskReport, TrainConfig, TrainResult, generalization_gap, statistical_risk_mc, train
from .experiments import (
    ConvergenceReport,
    GapReport,
    SweepConfig,
    check_weyl,
    run_gap_sweep_synthetic,
    run_output_convergence,
    run_sampling_consistency,
    run_spectrum_convergence,
)
from .datasets import (
    NodeClassificationDataset,
    TransductiveSplit,
    induced_subgraph,
    load_cora,
    run_gap_sweep_dataset,
)
