"""Frequency responses, the low-pass check, spectral graph filtering and activations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BASES = ("heat", "polynomial")
ACTIVATIONS = ("relu", "abs", "tanh", "identity")
# roundoff in computed Laplacian spectra puts the null eigenvalue slightly below 0
NEGATIVE_EIGENVALUE_TOL = 1e-8


@dataclass(frozen=True)
class FilterCoeffs:
    """Taps ``h_0..h_{K-1}`` of a heat-kernel or polynomial filter.

    With ``basis="heat"`` the response is ``sum_k h_k exp(-k lam)``; with
    ``basis="polynomial"`` it is ``sum_k h_k lam^k``.  Setting ``low_pass``
    on a heat filter requires ``h_0 == 0`` so the response vanishes at
    infinity faster than any power.
    """

    taps: np.ndarray
    basis: str = "heat"
    low_pass: bool = False

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=float))
        if taps.ndim != 1 or taps.size == 0:
            raise ValueError("taps must be a non-empty 1-D sequence")
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.low_pass and self.basis == "heat" and taps[0] != 0.0:
            raise ValueError("a low-pass heat filter needs h_0 = 0")
        object.__setattr__(self, "taps", taps)

    @property
    def K(self) -> int:
        return self.taps.size


@dataclass(frozen=True)
class LowPassReport:
    passed: bool
    sup: float
    argsup: float
    offending: float | None = None
    reason: str = ""


def basis_matrix(lam, K: int, basis: str = "heat") -> np.ndarray:
    """Columns ``exp(-k lam)`` (heat) or ``lam^k`` (polynomial) for ``k < K``."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    k = np.arange(K)
    if basis == "heat":
        return np.exp(-np.outer(lam, k))
    if basis == "polynomial":
        return lam[:, None] ** k[None, :]
    raise ValueError(f"unknown basis {basis!r}")


def _taps_and_basis(h, basis):
    if isinstance(h, FilterCoeffs):
        return h.taps, h.basis
    return np.atleast_1d(np.asarray(h, dtype=float)), basis


def frequency_response(h, lam, basis: str = "heat"):
    """Evaluate the filter response at ``lam`` (scalar or array)."""
    taps, basis = _taps_and_basis(h, basis)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < -NEGATIVE_EIGENVALUE_TOL):
        raise ValueError("frequency response is defined for lam >= 0")
    lam_arr = np.maximum(lam_arr, 0.0)
    out = basis_matrix(lam_arr, taps.size, basis) @ taps
    return float(out[0]) if lam_arr.ndim == 0 else out.reshape(lam_arr.shape)


def response_tensor(H: np.ndarray, lam, basis: str) -> np.ndarray:
    """Responses of a filter bank ``H[p, q, k]`` at each eigenvalue: ``R[i, p, q]``."""
    B = basis_matrix(lam, H.shape[2], basis)
    return np.einsum("ik,pqk->ipq", B, H)


def check_low_pass(h, d: int, grid=None) -> LowPassReport:
    """Check the ``|hhat(a)| = O(a^-d)`` envelope of a heat filter on a grid.

    The envelope ``|hhat(a)| a^d`` is evaluated over ``a`` in ``[1, 100]``; the
    filter passes when this is finite everywhere and nonincreasing for
    ``a >= max(K, 1)``.
    """
    taps, basis = _taps_and_basis(h, "heat")
    if basis != "heat":
        raise ValueError("check_low_pass applies to heat-basis filters")
    a = np.linspace(1.0, 100.0, 9901) if grid is None else np.asarray(grid, dtype=float)
    env = np.abs(frequency_response(taps, a, "heat")) * a**d
    if not np.all(np.isfinite(env)):
        bad = float(a[~np.isfinite(env)][0])
        return LowPassReport(False, float("inf"), bad, bad, "envelope not finite")
    j = int(np.argmax(env))
    sup, argsup = float(env[j]), float(a[j])
    tail = a >= max(taps.size, 1)
    tail_env = env[tail]
    rises = np.flatnonzero(np.diff(tail_env) > 1e-12 * max(sup, 1e-300))
    if rises.size:
        offending = float(a[tail][rises[0] + 1])
        return LowPassReport(False, sup, argsup, offending, "envelope increases on the tail")
    return LowPassReport(True, sup, argsup)


def graph_filter_apply(h, decomposition, x, basis: str = "heat") -> np.ndarray:
    """``sum_i hhat(lam_i) <x, phi_i>_N phi_i`` over the stored eigenpairs."""
    taps, basis = _taps_and_basis(h, basis)
    x = np.asarray(x, dtype=float)
    V = decomposition.eigenvectors
    coeffs = V.T @ x / V.shape[0]
    resp = frequency_response(taps, decomposition.eigenvalues, basis)
    if coeffs.ndim == 2:
        resp = resp[:, None]
    return V @ (resp * coeffs)


def activation_apply(kind: str, x):
    x = np.asarray(x, dtype=float)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "abs":
        return np.abs(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "identity":
        return x.copy()
    raise ValueError(f"unknown activation {kind!r}")


def activation_derivative(kind: str, x):
    """Derivative used in backpropagation; the subgradient at 0 is taken as 0."""
    x = np.asarray(x, dtype=float)
    if kind == "relu":
        return (x > 0).astype(float)
    if kind == "abs":
        return np.sign(x)
    if kind == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if kind == "identity":
        return np.ones_like(x)
    raise ValueError(f"unknown activation {kind!r}")
