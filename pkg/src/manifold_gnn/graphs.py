"""Epsilon-graphs on sampled points, their Laplacians and spectra.

Discrete signals on ``N`` nodes carry the inner product
``<u, v>_N = (1/N) sum_i u_i v_i``, so that sampled eigenfunctions keep unit
norm as ``N`` grows and graph eigenvectors are stored with ``||phi||_N = 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh
from scipy.spatial import cKDTree

DENSE_EIGEN_LIMIT = 4000
KERNEL_NORMALIZATIONS = ("paper", "consistent")


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpsilonGraph:
    N: int
    d: int
    epsilon: float
    weights: sp.csr_matrix
    laplacian: sp.csr_matrix
    normalization: str = "paper"
    isolated: int = 0
    warnings: tuple[str, ...] = ()

    @property
    def edge_weight(self) -> float:
        return kernel_weight(self.N, self.d, self.epsilon, self.normalization)

    @property
    def n_edges(self) -> int:
        return self.weights.nnz // 2


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (N, K), columns with ||.||_N = 1
    eigengaps: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    @property
    def N(self) -> int:
        return self.eigenvectors.shape[0]


def unit_ball_volume(d: int) -> float:
    # alpha_d = 2 pi alpha_{d-2} / d keeps alpha_1 = 2 and alpha_2 = pi exact
    alpha = 1.0 if d % 2 == 0 else 2.0
    for k in range(2 + d % 2, d + 1, 2):
        alpha *= 2.0 * math.pi / k
    return alpha


def kernel_weight(N: int, d: int, epsilon: float, normalization: str = "paper") -> float:
    """Weight of an edge between two points closer than ``epsilon``.

    ``"paper"`` is ``alpha_d / ((d+2) N eps^(d+2))``.  Its graph Laplacian
    converges to ``(alpha_d/(d+2))^2`` times the weighted Laplacian rather than
    the operator itself.  ``"consistent"`` uses ``(d+2) / (alpha_d N
    eps^(d+2))``, which removes that factor.
    """
    alpha = unit_ball_volume(d)
    if normalization == "paper":
        return alpha / ((d + 2) * N * epsilon ** (d + 2))
    if normalization == "consistent":
        return (d + 2) / (alpha * N * epsilon ** (d + 2))
    raise ValueError(f"unknown kernel normalization {normalization!r}")


def kernel_limit_factor(d: int, normalization: str = "paper") -> float:
    """Ratio between the large-N graph Laplacian and the weighted Laplacian."""
    if normalization == "consistent":
        return 1.0
    return (unit_ball_volume(d) / (d + 2)) ** 2


def build_epsilon_graph(points, d: int, epsilon: float, normalization: str = "paper") -> EpsilonGraph:
    """Connect every pair with ``0 < ||x_i - x_j|| <= epsilon`` by a constant weight.

    ``points`` is a :class:`PointSample` or an ``(N, ambient)`` array.  Isolated
    nodes are allowed; they are counted and reported in ``warnings``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    X = np.asarray(getattr(points, "points", points), dtype=float)
    N = X.shape[0]
    w = kernel_weight(N, d, epsilon, normalization)
    pairs = cKDTree(X).query_pairs(r=epsilon, output_type="ndarray")
    if pairs.size:
        gap = np.linalg.norm(X[pairs[:, 0]] - X[pairs[:, 1]], axis=1)
        pairs = pairs[gap > 0]
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]]) if pairs.size else np.empty(0, int)
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]]) if pairs.size else np.empty(0, int)
    W = sp.csr_matrix((np.full(rows.size, w), (rows, cols)), shape=(N, N))
    W.sort_indices()
    L = graph_laplacian(W)
    degree = np.diff(W.indptr)
    isolated = int(np.count_nonzero(degree == 0))
    notes: tuple[str, ...] = ()
    if isolated:
        notes = (f"{isolated} isolated node(s) at epsilon={epsilon:.6g}",)
    return EpsilonGraph(N, d, float(epsilon), W, L, normalization, isolated, notes)


def graph_laplacian(W):
    """``L = diag(W 1) - W`` for a symmetric, nonnegative, zero-diagonal ``W``."""
    is_sparse = sp.issparse(W)
    Wc = sp.csr_matrix(W) if is_sparse else np.asarray(W, dtype=float)
    if Wc.shape[0] != Wc.shape[1]:
        raise ValueError("weight matrix must be square")
    diff = abs(Wc - Wc.T)
    asym = diff.max() if Wc.shape[0] else 0.0
    if asym > 1e-12 * max(abs(Wc).max() if Wc.shape[0] else 0.0, 1e-300):
        raise ValueError(f"weight matrix is not symmetric (max asymmetry {asym:.3g})")
    if Wc.shape[0] and Wc.min() < 0:
        raise ValueError("weights must be nonnegative")
    diag = Wc.diagonal()
    if np.any(diag != 0):
        raise ValueError("weight matrix must have a zero diagonal")
    deg = np.asarray(Wc.sum(axis=1)).reshape(-1)
    if is_sparse:
        return (sp.diags(deg) - Wc).tocsr()
    return np.diag(deg) - Wc


def eigendecompose(L, K: int) -> SpectralDecomposition:
    """The ``K`` smallest eigenpairs, eigenvectors scaled to ``||phi||_N = 1``.

    Dense symmetric solver up to ``N = 4000``, shift-invert Lanczos above.
    Each eigenvector's first entry with magnitude above ``1e-8`` (relative) is
    made positive.
    """
    N = L.shape[0]
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    try:
        if N <= DENSE_EIGEN_LIMIT:
            dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
            lam, V = scipy.linalg.eigh(dense, subset_by_index=[0, K - 1], driver="evr")
        else:
            Ls = sp.csr_matrix(L)
            scale = abs(Ls).sum(axis=1).max()
            lam, V = eigsh(Ls, k=K, sigma=-1e-6 * scale, which="LM")
            order = np.argsort(lam, kind="stable")
            lam, V = lam[order], V[:, order]
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ArithmeticError) as exc:
        raise EigenSolverError(_diagnostics(L, K, exc)) from exc
    if not np.all(np.isfinite(lam)):
        raise EigenSolverError(_diagnostics(L, K, "non-finite eigenvalues"))
    V = V * math.sqrt(N)
    for j in range(K):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return SpectralDecomposition(lam, V, eigengaps(lam))


def eigengaps(lam: np.ndarray) -> np.ndarray:
    """``theta_i = min(lam_i - lam_{i-1}, lam_{i+1} - lam_i)``, one-sided at the ends."""
    lam = np.asarray(lam, dtype=float)
    if lam.size < 2:
        return np.full(lam.size, np.inf)
    diffs = np.diff(lam)
    left = np.concatenate([[np.inf], diffs])
    right = np.concatenate([diffs, [np.inf]])
    return np.minimum(left, right)


def discrete_inner_product(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v) / u.size)


def discrete_norm(u) -> float:
    return math.sqrt(discrete_inner_product(u, u))


def epsilon_schedule(N: int, d: int, c: float = 1.0) -> float:
    """``c (log N / N)^(1/(d+4))``."""
    if N < 2:
        raise ValueError("epsilon_schedule needs N >= 2")
    if c <= 0:
        raise ValueError("c must be positive")
    return c * (math.log(N) / N) ** (1.0 / (d + 4))


def export_weights_csv(graph: EpsilonGraph, path) -> None:
    """Write each undirected edge once as ``i,j,weight`` with ``i < j``."""
    W = sp.triu(graph.weights, k=1).tocoo()
    order = np.lexsort((W.col, W.row))
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "weight"])
        for r, c, v in zip(W.row[order], W.col[order], W.data[order]):
            out.writerow([int(r), int(c), repr(float(v))])


def export_spectrum_csv(decomposition: SpectralDecomposition, path, vectors_path=None) -> None:
    """``index,eigenvalue`` rows (1-based); optionally the wide eigenvector matrix."""
    with open(Path(path), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(decomposition.eigenvalues, start=1):
            out.writerow([i, repr(float(lam))])
    if vectors_path is not None:
        with open(Path(vectors_path), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["node"] + [f"phi_{i}" for i in range(1, decomposition.K + 1)])
            for n, row in enumerate(decomposition.eigenvectors):
                out.writerow([n] + [repr(float(x)) for x in row])


def _diagnostics(L, K, cause) -> str:
    N = L.shape[0]
    nnz = L.nnz if sp.issparse(L) else int(np.count_nonzero(L))
    A = sp.csr_matrix(L)
    asym = abs(A - A.T).max() if N else 0.0
    finite = np.all(np.isfinite(A.data))
    return (
        f"eigensolver failed for K={K}: {cause}; N={N}, nnz={nnz}, "
        f"max|L-L^T|={asym:.3g}, all finite={finite}"
    )

