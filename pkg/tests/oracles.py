"""Independent slow re-implementations used as test oracles."""

import numpy as np
import scipy.linalg

from manifold_gnn.gnn import loss_value


def naive_gnn(model, L, X):
    """Explicit loops over layers, output/input features and taps with dense matrix functions."""
    L = np.asarray(L.toarray() if hasattr(L, "toarray") else L, dtype=float)
    S = scipy.linalg.expm(-L) if model.basis == "heat" else L
    X = np.asarray(X, dtype=float).reshape(L.shape[0], -1)
    for l, H in enumerate(model.coeffs):
        F_out, F_in, K = H.shape
        Y = np.zeros((X.shape[0], F_out))
        for p in range(F_out):
            for q in range(F_in):
                z = X[:, q].copy()
                for k in range(K):
                    Y[:, p] += H[p, q, k] * z
                    z = S @ z
        last = l == model.n_layers - 1
        if last and model.linear_readout:
            X = Y
        elif model.activation == "relu":
            X = np.maximum(Y, 0)
        elif model.activation == "abs":
            X = np.abs(Y)
        elif model.activation == "tanh":
            X = np.tanh(Y)
        else:
            X = Y
    return X


def fd_gradient(model, shift, X, T, loss="l2", mask=None, step=1e-5):
    """Central finite differences of the loss over every flat coefficient."""
    from manifold_gnn import gnn_forward

    theta = model.flat()
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        up = loss_value(gnn_forward(model.from_flat(theta + e), shift, X), T, loss, mask)
        dn = loss_value(gnn_forward(model.from_flat(theta - e), shift, X), T, loss, mask)
        out[i] = (up - dn) / (2 * step)
    return out


def max_relative_error(g, ref):
    """Largest componentwise deviation relative to the largest reference entry."""
    g, ref = np.asarray(g).ravel(), np.asarray(ref).ravel()
    return float(np.max(np.abs(g - ref)) / max(np.max(np.abs(ref)), 1e-12))
