import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manifold_gnn import (
    GnnModel,
    PointSample,
    SpectralSignal,
    evaluate_signal,
    make_manifold,
    manifold_filter_apply,
    mnn_forward,
    sample_points,
)
from manifold_gnn.manifolds import default_quadrature_size, quadrature_rule

# Weighted Laplacian -(1/(2 rho)) (rho^2 f')' applied to cos(theta) by central
# differences with rho = 1/(2 pi), divided by cos(theta).  Frozen output of
# _weighted_laplacian_ratio() below.
C_RHO_CIRCLE = 0.07957747154594767


def _weighted_laplacian_ratio(n=20000):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    h = theta[1]
    rho = 1.0 / (2 * np.pi)
    f = np.cos(theta)
    # flux rho^2 f' on the staggered grid, then its divergence
    flux = rho**2 * (np.roll(f, -1) - f) / h
    div = (flux - np.roll(flux, 1)) / h
    Lf = -div / (2 * rho)
    mask = np.abs(f) > 0.5
    return float(np.mean(Lf[mask] / f[mask]))


def _circle_grid(Q=4096):
    return PointSample(
        np.column_stack([np.cos(2 * np.pi * np.arange(Q) / Q), np.sin(2 * np.pi * np.arange(Q) / Q)]),
        2 * np.pi * np.arange(Q) / Q,
        None,
        "circle",
    )


def test_weighted_laplacian_oracle_is_frozen():
    np.testing.assert_allclose(_weighted_laplacian_ratio(), C_RHO_CIRCLE, rtol=1e-6)


def test_circle_c_rho_matches_oracle():
    m = make_manifold("circle", 3)
    np.testing.assert_allclose(m.c_rho, C_RHO_CIRCLE, rtol=1e-12)
    np.testing.assert_allclose(m.c_rho, 1 / (4 * np.pi), rtol=1e-15)


def test_circle_first_eigenvalues():
    m = make_manifold("circle", 3)
    np.testing.assert_allclose(m.eigenvalues, [0.0, m.c_rho, m.c_rho])


def test_circle_k_squared_scaling():
    m = make_manifold("circle", 5)
    assert m.eigenvalues[3] == pytest.approx(4 * m.eigenvalues[1])


def test_sphere_eigenvalues_are_degree_scaled():
    m = make_manifold("sphere", 16)
    l = np.repeat(np.arange(4), 2 * np.arange(4) + 1)
    np.testing.assert_allclose(m.eigenvalues, l * (l + 1) / (8 * np.pi))


@pytest.mark.parametrize("kind", ["torus", "disk"])
def test_unsupported_kind(kind):
    with pytest.raises(ValueError, match="unsupported"):
        make_manifold(kind, 3)


def test_sphere_table_limit():
    with pytest.raises(ValueError, match="degree"):
        make_manifold("sphere", 31 * 31 + 1)


def test_bandwidth_must_be_positive():
    with pytest.raises(ValueError):
        make_manifold("circle", 0)


@pytest.mark.parametrize("kind,M", [("circle", 41), ("sphere", 49)])
def test_eigenvalues_nondecreasing(kind, M):
    lam = make_manifold(kind, M).eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert lam[0] == 0.0


def test_circle_orthonormality_on_grid():
    m = make_manifold("circle", 21)
    nodes, w = quadrature_rule("circle", 4096)
    B = m.eigenfunctions(nodes)
    np.testing.assert_allclose(B.T @ (w[:, None] * B), np.eye(21), atol=1e-6)


def test_sphere_orthonormality_on_product_rule():
    m = make_manifold("sphere", 36)
    nodes, w = quadrature_rule("sphere", 4096)
    B = m.eigenfunctions(nodes)
    np.testing.assert_allclose(B.T @ (w[:, None] * B), np.eye(36), atol=1e-6)


def test_sphere_orthonormality_monte_carlo():
    # independent check that does not share the product rule
    m = make_manifold("sphere", 9)
    pts = sample_points(m, 200_000, 3)
    B = m.eigenfunctions(pts.intrinsic_coords)
    np.testing.assert_allclose(B.T @ B / pts.N, np.eye(9), atol=2e-2)


def test_sphere_degree_one_closed_form():
    m = make_manifold("sphere", 4)
    pts = sample_points(m, 50, 11)
    x, y, z = pts.points.T
    B = m.eigenfunctions(pts.intrinsic_coords)
    r3 = math.sqrt(3)
    np.testing.assert_allclose(B[:, 0], 1.0)
    # real harmonics for m = -1, 0, 1 carry the Condon-Shortley sign
    np.testing.assert_allclose(B[:, 1], -r3 * y, atol=1e-12)
    np.testing.assert_allclose(B[:, 2], r3 * z, atol=1e-12)
    np.testing.assert_allclose(B[:, 3], -r3 * x, atol=1e-12)


def test_sample_points_deterministic():
    m = make_manifold("circle", 3)
    a = sample_points(m, 4, 7)
    b = sample_points(m, 4, 7)
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.intrinsic_coords, b.intrinsic_coords)


@pytest.mark.parametrize("kind", ["circle", "sphere"])
def test_points_on_manifold(kind):
    pts = sample_points(make_manifold(kind, 1), 100, 0)
    np.testing.assert_allclose(np.linalg.norm(pts.points, axis=1), 1.0, atol=1e-12)


def test_sphere_intrinsic_roundtrip():
    pts = sample_points("sphere", 100, 5)
    polar, az = pts.intrinsic_coords.T
    rebuilt = np.column_stack([np.sin(polar) * np.cos(az), np.sin(polar) * np.sin(az), np.cos(polar)])
    np.testing.assert_allclose(rebuilt, pts.points, atol=1e-12)


def test_circle_sample_mean_clt():
    N = 100_000
    pts = sample_points("circle", N, 1)
    assert abs(pts.points[:, 0].mean()) <= 3 * (1 / math.sqrt(2)) / math.sqrt(N)


def test_sample_points_rejects_empty():
    with pytest.raises(ValueError):
        sample_points("circle", 0, 0)


def test_zero_signal_evaluates_to_zero(circle5):
    pts = sample_points(circle5, 20, 0)
    np.testing.assert_array_equal(evaluate_signal(SpectralSignal(circle5, []), pts), 0.0)


def test_constant_eigenfunction(circle5):
    pts = sample_points(circle5, 20, 0)
    np.testing.assert_allclose(evaluate_signal(SpectralSignal(circle5, [1.0]), pts), 1.0)


def test_evaluate_at_theta_zero():
    m = make_manifold("circle", 3)
    pt = PointSample(np.array([[1.0, 0.0]]), np.array([0.0]), None, "circle")
    np.testing.assert_allclose(evaluate_signal(SpectralSignal(m, [0, 1, 0]), pt), [math.sqrt(2)])


def test_evaluate_manifold_mismatch(circle5):
    pts = sample_points("sphere", 5, 0)
    with pytest.raises(ValueError):
        evaluate_signal(SpectralSignal(circle5, [1.0]), pts)


def test_signal_longer_than_bandwidth(circle5):
    with pytest.raises(ValueError):
        SpectralSignal(circle5, np.ones(6))


def test_signal_zero_pads_beyond_bandwidth(circle5):
    s = SpectralSignal(circle5, [1.0, 2.0])
    np.testing.assert_array_equal(s.coeffs, [1, 2, 0, 0, 0])
    assert s.bandwidth_index == 2


def test_parseval_on_grid():
    m = make_manifold("circle", 9)
    f = SpectralSignal(m, np.random.default_rng(4).normal(size=9))
    v = evaluate_signal(f, _circle_grid())
    np.testing.assert_allclose(math.sqrt(np.mean(v**2)), f.norm(), atol=1e-6)


def test_identity_filter(circle5):
    f = SpectralSignal(circle5, [1, -2, 3, 0.5, 0.25])
    np.testing.assert_array_equal(manifold_filter_apply([1.0, 0.0], f).coeffs, f.coeffs)


def test_filter_with_overridden_eigenvalue():
    m = make_manifold("circle", 3).with_eigenvalues([0.0, math.log(2), math.log(2)])
    g = manifold_filter_apply([0.0, 1.0], SpectralSignal(m, [0, 1, 0]))
    assert g.coeffs[1] == pytest.approx(0.5)


def test_filter_matches_scalar_loop(circle5, rng):
    h = rng.normal(size=4)
    f = SpectralSignal(circle5, rng.normal(size=5))
    expected = []
    for lam, c in zip(circle5.eigenvalues, f.coeffs):
        resp = 0.0
        for k, hk in enumerate(h):
            resp += hk * math.exp(-k * lam)
        expected.append(resp * c)
    np.testing.assert_allclose(manifold_filter_apply(h, f).coeffs, expected, rtol=1e-14)


@given(
    st.lists(st.floats(-3, 3), min_size=5, max_size=5),
    st.lists(st.floats(-3, 3), min_size=5, max_size=5),
    st.integers(-4, 4),
    st.integers(-4, 4),
)
def test_filter_linearity(a, b, alpha, beta):
    m = make_manifold("circle", 5)
    h = [0.0, 0.7, -0.2]
    f, g = SpectralSignal(m, a), SpectralSignal(m, b)
    lhs = manifold_filter_apply(h, alpha * f + beta * g).coeffs
    rhs = alpha * manifold_filter_apply(h, f).coeffs + beta * manifold_filter_apply(h, g).coeffs
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_mnn_identity_on_nonnegative_signal(circle5):
    f = SpectralSignal(circle5, [2.0, 0.5, -0.3, 0.2])
    pts = sample_points(circle5, 50, 2)
    out = mnn_forward(GnnModel.single([1.0, 0.0]), f, pts)
    assert np.all(evaluate_signal(f, pts) >= 0)
    np.testing.assert_allclose(out[:, 0], evaluate_signal(f, pts), rtol=1e-14)


def test_mnn_zero_filter(circle5):
    f = SpectralSignal(circle5, [1.0, 0.5, -0.3])
    out = mnn_forward(GnnModel.single([0.0, 0.0, 0.0]), f, sample_points(circle5, 10, 0))
    np.testing.assert_array_equal(out, 0.0)


def _two_layer_oracle(h1, h2, fhat, theta_eval, Q=4096):
    # dense grid; the filtered post-activation is projected with an FFT
    m = make_manifold("circle", len(fhat))
    grid = 2 * np.pi * np.arange(Q) / Q
    lam = m.eigenvalues
    resp1 = sum(h * np.exp(-k * lam) for k, h in enumerate(h1))
    resp2 = sum(h * np.exp(-k * lam) for k, h in enumerate(h2))
    u = np.maximum(m.eigenfunctions(grid) @ (resp1 * fhat), 0.0)
    c = np.fft.rfft(u) / Q
    coeffs = np.zeros(len(fhat))
    coeffs[0] = c[0].real
    for i in range(1, len(fhat)):
        k = (i + 1) // 2
        coeffs[i] = math.sqrt(2) * (c[k].real if i % 2 else -c[k].imag)
    v = m.eigenfunctions(theta_eval) @ (resp2 * coeffs)
    return np.maximum(v, 0.0)


def test_mnn_two_layers_matches_dense_oracle():
    m = make_manifold("circle", 7)
    fhat = np.array([0.3, 1.0, -0.5, 0.4, 0.3, -0.2, 0.1])
    h1, h2 = [0.0, 1.0, 0.5], [0.2, 0.8, -0.3]
    model = GnnModel((np.reshape(h1, (1, 1, 3)), np.reshape(h2, (1, 1, 3))))
    pts = sample_points(m, 64, 9)
    out = mnn_forward(model, SpectralSignal(m, fhat), pts, quadrature=16 * 7)[:, 0]
    ref = _two_layer_oracle(h1, h2, fhat, pts.intrinsic_coords)
    np.testing.assert_allclose(out, ref, rtol=1e-3, atol=1e-3 * np.abs(ref).max())


def test_mnn_underspecified_quadrature(circle5):
    model = GnnModel((np.ones((1, 1, 2)), np.ones((1, 1, 2))))
    with pytest.raises(ValueError, match="underspecified"):
        mnn_forward(model, SpectralSignal(circle5, [1.0]), sample_points(circle5, 5, 0), quadrature=79)


def test_mnn_depth_one_ignores_quadrature(circle5):
    f = SpectralSignal(circle5, [0.1, 1.0, -0.5])
    pts = sample_points(circle5, 30, 1)
    model = GnnModel.single([0.0, 1.0, 0.5])
    a = mnn_forward(model, f, pts)
    b = mnn_forward(model, f, pts, quadrature=3)
    np.testing.assert_array_equal(a, b)


def test_default_quadrature_size():
    assert default_quadrature_size(5) == 4096
    assert default_quadrature_size(1000) == 32000


@pytest.mark.parametrize("kind", ["circle", "sphere"])
def test_quadrature_weights_sum_to_one(kind):
    _, w = quadrature_rule(kind, 1000)
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
