"""Analytic manifolds with closed-form weighted-Laplacian spectra.

Two manifolds are supported, the unit circle in R^2 and the unit sphere in
R^3, both carrying the uniform probability measure.  With a constant density
``rho`` the weighted Laplacian ``-(1/(2 rho)) div(rho^2 grad f)`` reduces to
``(rho / 2)`` times the Laplace-Beltrami operator, so every eigenvalue is the
classical one rescaled by ``c_rho = rho / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .filters import activation_apply, response_tensor

SUPPORTED_KINDS = ("circle", "sphere")
MAX_SPHERE_DEGREE = 30


@dataclass(frozen=True)
class ManifoldModel:
    """A manifold together with its first ``M`` eigenpairs.

    Eigenfunctions are orthonormal in ``L^2(M, mu)`` where ``mu`` is the
    uniform probability measure, so the constant eigenfunction equals 1.
    """

    kind: str
    d: int
    M: int
    eigenvalues: np.ndarray
    density: float
    # (cos k theta, sin k theta) pairs on the circle, degree l on the sphere
    frequencies: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        return 1.0 / self.density

    @property
    def c_rho(self) -> float:
        return self.density / 2.0

    @property
    def ambient_dim(self) -> int:
        return self.d + 1

    def eigenfunctions(self, intrinsic: np.ndarray, count: int | None = None) -> np.ndarray:
        """Evaluate the first ``count`` eigenfunctions, shape ``(n, count)``."""
        count = self.M if count is None else count
        if count > self.M:
            raise ValueError(f"only {self.M} eigenpairs available, asked for {count}")
        if self.kind == "circle":
            return _circle_basis(np.asarray(intrinsic, dtype=float).reshape(-1), count)
        coords = np.asarray(intrinsic, dtype=float).reshape(-1, 2)
        return _sphere_basis(coords[:, 0], coords[:, 1], count)

    def tied_groups(self, count: int | None = None) -> list[list[int]]:
        """Zero-based index groups sharing an eigenvalue, truncated at ``count``."""
        count = self.M if count is None else count
        groups: list[list[int]] = []
        for i in range(count):
            if groups and self.frequencies[i] == self.frequencies[groups[-1][0]]:
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups

    def with_eigenvalues(self, eigenvalues: Sequence[float]) -> "ManifoldModel":
        """Copy with overridden eigenvalues (used to pin synthetic spectra in tests)."""
        lam = np.asarray(eigenvalues, dtype=float)
        if lam.shape != (self.M,):
            raise ValueError(f"expected {self.M} eigenvalues, got shape {lam.shape}")
        return ManifoldModel(self.kind, self.d, self.M, lam, self.density, self.frequencies)


@dataclass(frozen=True)
class SpectralSignal:
    """A bandlimited signal stored as its first ``M`` spectral coefficients."""

    manifold: ManifoldModel
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if coeffs.size > self.manifold.M:
            raise ValueError(
                f"signal has {coeffs.size} coefficients but manifold keeps {self.manifold.M}"
            )
        padded = np.zeros(self.manifold.M)
        padded[: coeffs.size] = coeffs
        object.__setattr__(self, "coeffs", padded)

    @property
    def bandwidth_index(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1] + 1) if nz.size else 0

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))

    def __add__(self, other: "SpectralSignal") -> "SpectralSignal":
        _check_same_manifold(self.manifold, other.manifold)
        return SpectralSignal(self.manifold, self.coeffs + other.coeffs)

    def __rmul__(self, alpha: float) -> "SpectralSignal":
        return SpectralSignal(self.manifold, alpha * self.coeffs)


@dataclass(frozen=True)
class PointSample:
    points: np.ndarray
    intrinsic_coords: np.ndarray
    seed: int | None
    manifold_kind: str

    @property
    def N(self) -> int:
        return self.points.shape[0]


def make_manifold(kind: str, M: int) -> ManifoldModel:
    """Build a circle or sphere with its first ``M`` eigenpairs.

    Circle basis: ``1, sqrt2 cos t, sqrt2 sin t, sqrt2 cos 2t, ...`` with
    eigenvalues ``c_rho k^2``; sphere basis: real spherical harmonics ordered by
    degree ``l`` then order ``m = -l..l``, eigenvalues ``c_rho l(l+1)``.
    """
    if kind not in SUPPORTED_KINDS:
        raise ValueError(f"unsupported manifold kind {kind!r}; expected one of {SUPPORTED_KINDS}")
    if M < 1:
        raise ValueError("bandwidth index M must be >= 1")
    if kind == "circle":
        density = 1.0 / (2.0 * math.pi)
        freq = (np.arange(M) + 1) // 2
        lap = freq.astype(float) ** 2
        d = 1
    else:
        max_count = (MAX_SPHERE_DEGREE + 1) ** 2
        if M > max_count:
            raise ValueError(
                f"sphere harmonics implemented up to degree {MAX_SPHERE_DEGREE} "
                f"({max_count} eigenpairs); asked for {M}"
            )
        density = 1.0 / (4.0 * math.pi)
        freq = np.floor(np.sqrt(np.arange(M))).astype(int)
        lap = (freq * (freq + 1)).astype(float)
        d = 2
    return ManifoldModel(kind, d, M, (density / 2.0) * lap, density, freq)


def sample_points(manifold: ManifoldModel | str, N: int, seed: int | None) -> PointSample:
    """Draw ``N`` i.i.d. points from the uniform measure on the manifold."""
    if N < 1:
        raise ValueError("N must be >= 1")
    kind = manifold if isinstance(manifold, str) else manifold.kind
    rng = np.random.default_rng(seed)
    if kind == "circle":
        theta = rng.uniform(0.0, 2.0 * math.pi, size=N)
        points = np.column_stack([np.cos(theta), np.sin(theta)])
        return PointSample(points, theta, seed, kind)
    if kind == "sphere":
        g = rng.standard_normal((N, 3))
        points = g / np.linalg.norm(g, axis=1, keepdims=True)
        return PointSample(points, ambient_to_intrinsic(points, "sphere"), seed, kind)
    raise ValueError(f"unsupported manifold kind {kind!r}")


def ambient_to_intrinsic(points: np.ndarray, kind: str) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if kind == "circle":
        return np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * math.pi)
    polar = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
    azimuth = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * math.pi)
    return np.column_stack([polar, azimuth])


def evaluate_signal(signal: SpectralSignal, points: PointSample) -> np.ndarray:
    """Sampling operator: ``v_i = f(x_i) = sum_j fhat_j phi_j(x_i)``."""
    if points.manifold_kind != signal.manifold.kind:
        raise ValueError(
            f"signal lives on a {signal.manifold.kind}, points on a {points.manifold_kind}"
        )
    basis = signal.manifold.eigenfunctions(points.intrinsic_coords)
    return basis @ signal.coeffs


def manifold_filter_apply(h, signal: SpectralSignal, basis: str = "heat") -> SpectralSignal:
    """Exact spectral filtering ``ghat_i = hhat(lambda_i) fhat_i``."""
    from .filters import frequency_response

    response = frequency_response(h, signal.manifold.eigenvalues, basis=basis)
    return SpectralSignal(signal.manifold, response * signal.coeffs)


def default_quadrature_size(M: int) -> int:
    return max(4096, 32 * M)


def quadrature_rule(kind: str, Q: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic nodes (intrinsic coordinates) and weights summing to 1.

    The circle uses the ``Q``-point periodic trapezoid rule.  The sphere uses a
    Gauss-Legendre rule in ``cos(polar)`` times a trapezoid rule in azimuth with
    at least ``Q`` nodes in total.
    """
    if kind == "circle":
        nodes = 2.0 * math.pi * np.arange(Q) / Q
        return nodes, np.full(Q, 1.0 / Q)
    n_polar = max(2, math.ceil(math.sqrt(Q / 2.0)))
    n_az = 2 * n_polar
    x, w = np.polynomial.legendre.leggauss(n_polar)
    polar = np.arccos(x)
    az = 2.0 * math.pi * np.arange(n_az) / n_az
    P, A = np.meshgrid(polar, az, indexing="ij")
    weights = np.repeat(w / 2.0, n_az) / n_az
    return np.column_stack([P.ravel(), A.ravel()]), weights


def project_onto_eigenbasis(manifold: ManifoldModel, values: np.ndarray, nodes, weights) -> np.ndarray:
    """Quadrature estimate of ``<u, phi_i>`` for sampled values ``u`` (columns)."""
    basis = manifold.eigenfunctions(nodes)
    return basis.T @ (weights[:, None] * values.reshape(len(weights), -1))


def mnn_forward(model, signals, eval_points: PointSample, quadrature: int | None = None) -> np.ndarray:
    """Evaluate a manifold neural network and sample its output at ``eval_points``.

    Layer 1 is exact: filtering happens on the spectral coefficients and the
    nonlinearity is applied pointwise at the evaluation points.  For deeper
    networks the post-activation features are projected back onto the first
    ``M`` eigenfunctions with a deterministic quadrature rule of size
    ``quadrature`` before the next bank of filters.

    Parameters
    ----------
    model : GnnModel
        Filter bank shared with the graph network.
    signals : SpectralSignal or sequence of SpectralSignal
        One signal per input feature.
    eval_points : PointSample
        Where the output is sampled.
    quadrature : int, optional
        Quadrature size for re-projection; defaults to ``max(4096, 32 M)`` and
        must be at least ``16 M`` when given explicitly.

    Returns
    -------
    ndarray of shape ``(n_points, F_L)``.
    """
    if isinstance(signals, SpectralSignal):
        signals = [signals]
    signals = list(signals)
    manifold = signals[0].manifold
    for s in signals[1:]:
        _check_same_manifold(manifold, s.manifold)
    if eval_points.manifold_kind != manifold.kind:
        raise ValueError("evaluation points and signals live on different manifolds")
    if len(signals) != model.dims[0]:
        raise ValueError(f"model expects {model.dims[0]} input features, got {len(signals)}")

    n_layers = model.n_layers
    if n_layers > 1:
        if quadrature is None:
            quadrature = default_quadrature_size(manifold.M)
        elif quadrature < 16 * manifold.M:
            raise ValueError(
                f"quadrature size {quadrature} underspecified for a {n_layers}-layer MNN; "
                f"need at least 16*M = {16 * manifold.M}"
            )
        nodes, weights = quadrature_rule(manifold.kind, quadrature)
        node_basis = manifold.eigenfunctions(nodes)

    coeffs = np.column_stack([s.coeffs for s in signals])  # (M, F_0)
    eval_basis = manifold.eigenfunctions(eval_points.intrinsic_coords)
    for layer, H in enumerate(model.coeffs):
        R = response_tensor(H, manifold.eigenvalues, model.basis)
        out_coeffs = np.einsum("ipq,iq->ip", R, coeffs)
        last = layer == n_layers - 1
        if last:
            values = eval_basis @ out_coeffs
            if model.linear_readout:
                return values
            return activation_apply(model.activation, values)
        post = activation_apply(model.activation, node_basis @ out_coeffs)
        coeffs = node_basis.T @ (weights[:, None] * post)
    raise AssertionError("unreachable")


def _check_same_manifold(a: ManifoldModel, b: ManifoldModel):
    if a.kind != b.kind or a.M != b.M:
        raise ValueError(f"manifold mismatch: {a.kind}/M={a.M} vs {b.kind}/M={b.M}")


def _circle_basis(theta: np.ndarray, count: int) -> np.ndarray:
    out = np.empty((theta.size, count))
    out[:, 0] = 1.0
    root2 = math.sqrt(2.0)
    for i in range(1, count):
        k = (i + 1) // 2
        out[:, i] = root2 * (np.cos(k * theta) if i % 2 == 1 else np.sin(k * theta))
    return out


def _sphere_basis(polar: np.ndarray, azimuth: np.ndarray, count: int) -> np.ndarray:
    # sqrt(4 pi) rescales unit-sphere-area orthonormality to the probability measure
    scale = math.sqrt(4.0 * math.pi)
    out = np.empty((polar.size, count))
    i = 0
    l = 0
    while i < count:
        for m in range(-l, l + 1):
            if i >= count:
                break
            Y = special.sph_harm_y(l, abs(m), polar, azimuth)
            if m == 0:
                out[:, i] = scale * Y.real
            elif m > 0:
                out[:, i] = scale * math.sqrt(2.0) * Y.real
            else:
                out[:, i] = scale * math.sqrt(2.0) * Y.imag
            i += 1
        l += 1
    return out
