"""Spectral graph neural networks: forward pass, exact gradients and JSON I/O.

A layer maps ``F_in`` features to ``F_out`` features through a bank of filters
``H[p, q, k]`` followed by a pointwise nonlinearity.  The bank can run on

* a :class:`~manifold_gnn.graphs.SpectralDecomposition` (filters act on the
  stored eigenpairs), or
* a sparse or dense shift operator ``S`` (filters act as ``sum_k h_k S^k``
  for the polynomial basis or ``sum_k h_k exp(-k S)`` for the heat basis).

Both routes agree when the decomposition holds the full spectrum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .filters import ACTIVATIONS, BASES, activation_apply, activation_derivative, basis_matrix
from .graphs import SpectralDecomposition

LOSSES = ("l2", "cross_entropy")


@dataclass(frozen=True)
class GnnModel:
    """Layered filter coefficients plus the nonlinearity.

    ``coeffs[l]`` has shape ``(F_{l+1}, F_l, K)``.  With ``linear_readout`` the
    last layer skips the nonlinearity (used for classification logits).  With
    ``low_pass`` (heat basis only) every ``h_0`` tap is pinned at 0, and
    training leaves it there.
    """

    coeffs: tuple
    activation: str = "relu"
    basis: str = "heat"
    linear_readout: bool = False
    low_pass: bool = False

    def __post_init__(self):
        coeffs = tuple(np.array(c, dtype=float) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a GNN needs at least one layer")
        K = coeffs[0].shape[2] if coeffs[0].ndim == 3 else None
        for l, c in enumerate(coeffs):
            if c.ndim != 3 or c.shape[2] != K:
                raise ValueError(f"layer {l} coefficients must have shape (F_out, F_in, {K})")
            if l and c.shape[1] != coeffs[l - 1].shape[0]:
                raise ValueError(
                    f"layer {l} expects {c.shape[1]} inputs but layer {l - 1} "
                    f"produces {coeffs[l - 1].shape[0]}"
                )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.low_pass:
            if self.basis != "heat":
                raise ValueError("low_pass applies to heat-basis models")
            if any(np.any(c[:, :, 0] != 0.0) for c in coeffs):
                raise ValueError("a low-pass model needs every h_0 tap equal to 0")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_layers(self) -> int:
        return len(self.coeffs)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.coeffs[0].shape[1],) + tuple(c.shape[0] for c in self.coeffs)

    @property
    def n_taps(self) -> int:
        return self.coeffs[0].shape[2]

    @property
    def n_params(self) -> int:
        return sum(c.size for c in self.coeffs)

    def with_coeffs(self, coeffs: Sequence[np.ndarray]) -> "GnnModel":
        return GnnModel(tuple(coeffs), self.activation, self.basis, self.linear_readout, self.low_pass)

    def flat(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.coeffs])

    def from_flat(self, vector) -> "GnnModel":
        vector = np.asarray(vector, dtype=float)
        out, start = [], 0
        for c in self.coeffs:
            out.append(vector[start : start + c.size].reshape(c.shape))
            start += c.size
        if start != vector.size:
            raise ValueError(f"expected {start} parameters, got {vector.size}")
        return self.with_coeffs(out)

    @classmethod
    def random(
        cls,
        dims: Sequence[int],
        K: int = 5,
        *,
        basis: str = "heat",
        activation: str = "relu",
        rng=None,
        scale: float | None = None,
        low_pass: bool = False,
        linear_readout: bool = False,
    ) -> "GnnModel":
        """Gaussian initialization with std ``scale`` (default ``1/sqrt(F_in K)``)."""
        rng = np.random.default_rng(rng)
        coeffs = []
        for f_in, f_out in zip(dims[:-1], dims[1:]):
            s = scale if scale is not None else 1.0 / np.sqrt(f_in * K)
            H = s * rng.standard_normal((f_out, f_in, K))
            if low_pass:
                H[:, :, 0] = 0.0
            coeffs.append(H)
        return cls(tuple(coeffs), activation, basis, linear_readout, low_pass)

    @classmethod
    def single(cls, taps, activation: str = "relu", basis: str = "heat", low_pass: bool = False) -> "GnnModel":
        """One layer, one feature in and out."""
        taps = np.atleast_1d(np.asarray(taps, dtype=float))
        return cls((taps.reshape(1, 1, -1),), activation, basis, low_pass=low_pass)

    def to_dict(self) -> dict:
        return {
            "basis": self.basis,
            "activation": self.activation,
            "linear_readout": self.linear_readout,
            "low_pass": self.low_pass,
            "layer_dims": list(self.dims),
            "taps": self.n_taps,
            "coefficients": [float(x) for x in self.flat()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GnnModel":
        dims = data["layer_dims"]
        K = int(data["taps"])
        flat = np.asarray(data["coefficients"], dtype=float)
        coeffs, start = [], 0
        for f_in, f_out in zip(dims[:-1], dims[1:]):
            size = f_out * f_in * K
            coeffs.append(flat[start : start + size].reshape(f_out, f_in, K))
            start += size
        if start != flat.size:
            raise ValueError(f"coefficient array has {flat.size} entries, dims imply {start}")
        return cls(
            tuple(coeffs),
            data["activation"],
            data["basis"],
            bool(data.get("linear_readout", False)),
            bool(data.get("low_pass", False)),
        )


def save_model(model: GnnModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def load_model(path) -> GnnModel:
    return GnnModel.from_dict(json.loads(Path(path).read_text()))


# -- filter bank routes -------------------------------------------------------


class _SpectralBank:
    def __init__(self, decomposition: SpectralDecomposition, basis: str, K: int):
        self.V = decomposition.eigenvectors
        self.N = self.V.shape[0]
        self.B = basis_matrix(decomposition.eigenvalues, K, basis)
        self._input = None

    def _transform(self, X, first):
        if first and self._input is X:
            return self._Xh
        Xh = self.V.T @ X / self.N
        if first:
            self._input, self._Xh = X, Xh
        return Xh

    def forward(self, H, X, first=False):
        Xh = self._transform(X, first)
        R = np.einsum("ik,pqk->ipq", self.B, H)
        Y = self.V @ np.einsum("ipq,iq->ip", R, Xh)
        return Y, (Xh, R)

    def backward(self, H, cache, dY, need_dx=True):
        Xh, R = cache
        dYh = self.V.T @ dY
        dH = np.einsum("ip,iq,ik->pqk", dYh, Xh, self.B)
        dX = self.V @ np.einsum("ipq,ip->iq", R, dYh) / self.N if need_dx else None
        return dH, dX


class _ShiftBank:
    def __init__(self, S, basis: str, K: int):
        self.S = sp.csr_matrix(S) if sp.issparse(S) else np.asarray(S, dtype=float)
        self.basis = basis
        self.K = K
        self._heat = None
        if basis == "heat" and not sp.issparse(self.S):
            self._heat = scipy.linalg.expm(-self.S)
        self._input = None

    def step(self, X):
        if self.basis == "polynomial":
            return self.S @ X
        if self._heat is not None:
            return self._heat @ X
        return expm_multiply(-self.S, X)

    def _terms(self, X, first):
        if first and self._input is X:
            return self._Z0
        Z = [X]
        for _ in range(1, self.K):
            Z.append(self.step(Z[-1]))
        if first:
            # sparse input features (bag-of-words) stay cheap across epochs
            if self.basis == "polynomial" and sp.issparse(self.S) and np.count_nonzero(X) < 0.1 * X.size:
                Z = [sp.csr_matrix(z) for z in Z]
            self._input, self._Z0 = X, Z
        return Z

    def forward(self, H, X, first=False):
        Z = self._terms(X, first)
        Y = sum(np.asarray(Z[k] @ H[:, :, k].T) for k in range(self.K))
        return Y, Z

    def backward(self, H, Z, dY, need_dx=True):
        dH = np.stack([np.asarray(Z[k].T @ dY).T for k in range(self.K)], axis=2)
        if not need_dx:
            return dH, None
        acc = dY @ H[:, :, self.K - 1]
        for k in range(self.K - 2, -1, -1):
            acc = self.step(acc) + dY @ H[:, :, k]
        return dH, acc


def _make_bank(model: GnnModel, shift):
    if isinstance(shift, SpectralDecomposition):
        return _SpectralBank(shift, model.basis, model.n_taps)
    return _ShiftBank(shift, model.basis, model.n_taps)


def _as_matrix(inputs, F0):
    X = np.asarray(inputs, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.shape[1] != F0:
        raise ValueError(f"model expects {F0} input features, got {X.shape[1]}")
    return X, squeeze


def _run(model, bank, X):
    caches, pre = [], []
    for l, H in enumerate(model.coeffs):
        Y, cache = bank.forward(H, X, first=l == 0)
        caches.append(cache)
        pre.append(Y)
        last = l == model.n_layers - 1
        X = Y if (last and model.linear_readout) else activation_apply(model.activation, Y)
    return X, caches, pre


def gnn_forward(model: GnnModel, shift, inputs) -> np.ndarray:
    """Run the network; a 1-D input with one output feature returns a 1-D vector."""
    X, squeeze = _as_matrix(inputs, model.dims[0])
    out, _, _ = _run(model, _make_bank(model, shift), X)
    return out[:, 0] if squeeze and out.shape[1] == 1 else out


# -- losses -------------------------------------------------------------------


def _softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def loss_value(outputs, targets, loss: str = "l2", mask=None) -> float:
    """Mean over (masked) nodes of squared error or softmax cross-entropy."""
    out = np.asarray(outputs, dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    idx = np.arange(out.shape[0]) if mask is None else np.asarray(mask)
    if loss == "l2":
        T = np.asarray(targets, dtype=float).reshape(out.shape[0], -1)
        return float(np.sum((out[idx] - T[idx]) ** 2) / idx.size)
    if loss == "cross_entropy":
        labels = np.asarray(targets).astype(int).reshape(-1)
        Z = out[idx]
        Z = Z - Z.max(axis=1, keepdims=True)
        logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
        return float(-np.mean(logp[np.arange(idx.size), labels[idx]]))
    raise ValueError(f"unknown loss {loss!r}")


def _loss_grad(out, targets, loss, mask):
    idx = np.arange(out.shape[0]) if mask is None else np.asarray(mask)
    G = np.zeros_like(out)
    if loss == "l2":
        T = np.asarray(targets, dtype=float).reshape(out.shape[0], -1)
        G[idx] = 2.0 * (out[idx] - T[idx]) / idx.size
    else:
        labels = np.asarray(targets).astype(int).reshape(-1)
        P = _softmax(out[idx])
        P[np.arange(idx.size), labels[idx]] -= 1.0
        G[idx] = P / idx.size
    return G


def loss_and_gradient(model: GnnModel, shift, inputs, targets, loss: str = "l2", mask=None, bank=None):
    """Loss and its exact gradient with respect to every filter coefficient.

    Reverse accumulation through the filter banks and the nonlinearities; the
    ReLU subgradient at 0 is 0.  ``mask`` restricts the loss to a node subset.
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    X, _ = _as_matrix(inputs, model.dims[0])
    bank = bank or _make_bank(model, shift)
    out, caches, pre = _run(model, bank, X)
    value = loss_value(out, targets, loss, mask)
    dX = _loss_grad(out, targets, loss, mask)
    grads = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        last = l == model.n_layers - 1
        dY = dX if (last and model.linear_readout) else dX * activation_derivative(model.activation, pre[l])
        grads[l], dX = bank.backward(model.coeffs[l], caches[l], dY, need_dx=l > 0)
    if model.low_pass:
        for g in grads:
            g[:, :, 0] = 0.0
    return value, grads


def gnn_gradient(model: GnnModel, shift, inputs, targets, loss: str = "l2", mask=None) -> list[np.ndarray]:
    return loss_and_gradient(model, shift, inputs, targets, loss, mask)[1]
