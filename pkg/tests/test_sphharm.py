import itertools
import math

import numpy as np
import pytest

from asymexp.errors import NodeMismatch, UnsupportedDegree, UnsupportedDimension
from asymexp.sampling import fd_laplacian, random_orthogonal
from asymexp.sphharm import (
    build_basis,
    build_quadrature,
    build_zonal_basis,
    harmonic_dimension,
    project,
    reconstruct,
    sphere_area,
)


def monomial_moment(exps):
    """Exact integral of prod x_i^a_i over S^(n-1) (Beta-function formula)."""
    if any(a % 2 for a in exps):
        return 0.0
    g = [math.gamma((a + 1) / 2) for a in exps]
    return 2.0 * math.prod(g) / math.gamma(sum((a + 1) / 2 for a in exps))


def test_moment_oracle_sanity():
    assert monomial_moment((0, 0, 0)) == pytest.approx(4 * math.pi)
    assert monomial_moment((2, 2, 0)) == pytest.approx(4 * math.pi / 15)
    assert monomial_moment((4, 0, 0)) == pytest.approx(4 * math.pi / 5)


def test_quadrature_examples_s2():
    q2 = build_quadrature(3, 2)
    assert q2.integrate(q2.nodes[:, 0] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    q4 = build_quadrature(3, 4)
    assert q4.integrate(q4.nodes[:, 0] ** 2 * q4.nodes[:, 1] ** 2) == pytest.approx(4 * math.pi / 15, rel=1e-14)
    for D in (1, 5, 17):
        q = build_quadrature(3, D)
        assert abs(q.integrate(q.nodes[:, 0])) < 1e-14


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("D", [0, 3, 6, 9])
def test_quadrature_exact_on_monomials(n, D):
    q = build_quadrature(n, D)
    assert q.weights.sum() == pytest.approx(sphere_area(n), rel=1e-10)
    assert np.all(q.weights > 0)
    for exps in itertools.product(range(D + 1), repeat=n):
        if sum(exps) > D:
            continue
        val = q.integrate(np.prod(q.nodes ** np.array(exps), axis=1))
        assert val == pytest.approx(monomial_moment(exps), abs=1e-12)


def test_quadrature_rejects_bad_input():
    with pytest.raises(UnsupportedDimension):
        build_quadrature(6, 4)
    with pytest.raises(ValueError):
        build_quadrature(3, 41)


def test_basis_examples():
    b0 = build_basis(3, 0)
    assert b0.size == 1 and b0.eigenvalue == 0
    np.testing.assert_allclose(b0(np.array([[0, 0, 1.0]])), 1 / math.sqrt(4 * math.pi))
    b1 = build_basis(3, 1)
    assert b1.size == 3 and b1.eigenvalue == 2
    b2 = build_basis(3, 2)
    assert b2.size == 5 and b2.eigenvalue == 6


@pytest.mark.parametrize("k", range(9))
def test_s2_basis_orthonormal_and_dimension(k):
    q = build_quadrature(3, 2 * k + 4)
    b = build_basis(3, k)
    assert b.size == harmonic_dimension(3, k) == 2 * k + 1
    Y = b(q.nodes)
    G = (Y * q.weights[:, None]).T @ Y
    assert np.abs(G - np.eye(b.size)).max() < 1e-9


def test_cross_degree_orthogonality():
    q = build_quadrature(3, 20)
    Y3, Y5 = build_basis(3, 3)(q.nodes), build_basis(3, 5)(q.nodes)
    assert np.abs((Y3 * q.weights[:, None]).T @ Y5).max() < 1e-12


@pytest.mark.parametrize("n", [4, 5])
def test_higher_dim_bases(n):
    q = build_quadrature(n, 22)
    for k in range(9):
        b = build_basis(n, k)
        Y = b(q.nodes)
        G = (Y * q.weights[:, None]).T @ Y
        assert np.abs(G - np.eye(b.size)).max() < 1e-9
        assert b.eigenvalue == k * (k + n - 2)
        if k <= 1:
            assert b.complete and b.size == harmonic_dimension(n, k)
        else:
            assert not b.complete and b.size == 1


def test_zonal_axis_is_configurable():
    axis = np.array([1.0, 1.0, 0.0, 0.0])
    b = build_zonal_basis(4, 3, axis)
    e = axis / np.linalg.norm(axis)
    R = random_orthogonal(4, np.random.default_rng(0))
    # invariant under rotations fixing the axis: reflect across a plane containing it
    v = np.array([0.0, 0.0, 1.0, 0.0])
    H = np.eye(4) - 2 * np.outer(v, v)
    pts = R[:5] / np.linalg.norm(R[:5], axis=1, keepdims=True)
    np.testing.assert_allclose(b(pts), b(pts @ H.T), atol=1e-14)
    assert b(e[None])[0, 0] > 0


@pytest.mark.parametrize("k", range(1, 9))
def test_laplace_beltrami_eigenvalue_s2(k):
    """-Delta_S Y = k(k+1) Y via the Laplacian of the 0-homogeneous extension."""
    b = build_basis(3, k)
    rng = np.random.default_rng(k)
    pts = rng.standard_normal((6, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)

    for m in range(b.size):
        def ext(x, m=m):
            return b(x / np.linalg.norm(x, axis=-1, keepdims=True))[..., m]

        lap = fd_laplacian(ext, pts, 1e-3, order=4)
        scale = np.abs(b(pts)[:, m]).max() + 1.0
        assert np.abs(-lap - b.eigenvalue * ext(pts)).max() < 1e-4 * scale * b.eigenvalue


def test_unsupported_degree():
    with pytest.raises(UnsupportedDegree):
        build_basis(3, 9)
    with pytest.raises(UnsupportedDimension):
        build_basis(2, 1)


def test_project_examples():
    q = build_quadrature(3, 12)
    b1 = build_basis(3, 1)
    field = b1(q.nodes)[:, 1]
    np.testing.assert_allclose(project(field, b1, q), [0, 1, 0], atol=1e-9)

    c = 2.5
    ones = np.full(len(q), c)
    assert project(ones, build_basis(3, 0), q)[0] == pytest.approx(c * math.sqrt(4 * math.pi), rel=1e-13)
    for k in range(1, 5):
        assert np.abs(project(ones, build_basis(3, k), q)).max() < 1e-10


def test_project_cubic():
    """x1^3 lives in degrees 1 and 3; its x1-coefficient is <x1^3, Y_x1>."""
    q = build_quadrature(3, 12)
    field = q.nodes[:, 0] ** 3
    c1 = project(field, build_basis(3, 1), q)
    # Y_x1 = sqrt(3/(4 pi)) x1, so <x1^3, Y_x1> = sqrt(3/(4 pi)) * 4 pi / 5
    expected = math.sqrt(3 / (4 * math.pi)) * monomial_moment((4, 0, 0))
    np.testing.assert_allclose(c1, [0, expected, 0], atol=1e-12)
    for k in (0, 2, 4):
        assert np.abs(project(field, build_basis(3, k), q)).max() < 1e-12
    assert np.abs(project(field, build_basis(3, 3), q)).max() > 0.1


def test_project_node_mismatch():
    q = build_quadrature(3, 8)
    b = build_basis(3, 1)
    with pytest.raises(NodeMismatch):
        project(np.zeros(len(q) + 1), b, q)
    with pytest.raises(NodeMismatch):
        project(np.zeros(len(q)), b, q, nodes=q.nodes[::-1])


def test_parseval_partial_sums():
    q = build_quadrature(3, 30)
    x = q.nodes
    field = np.exp(0.7 * x[:, 0] - 0.2 * x[:, 2]) + x[:, 1] ** 2
    total = q.integrate(field**2)
    partial = np.cumsum([np.sum(project(field, build_basis(3, k), q) ** 2) for k in range(9)])
    assert np.all(np.diff(partial) >= 0)
    assert partial[-1] <= total * (1 + 1e-12)
    assert partial[-1] == pytest.approx(total, rel=1e-6)


def test_rotation_preserves_degree_norms():
    q = build_quadrature(3, 20)
    R = random_orthogonal(3, np.random.default_rng(9))

    def field(x):
        return x[:, 0] ** 3 - 2 * x[:, 1] * x[:, 2] + 0.5 * x[:, 0] * x[:, 1] ** 4

    for k in range(7):
        b = build_basis(3, k)
        a = np.linalg.norm(project(field(q.nodes), b, q))
        r = np.linalg.norm(project(field(q.nodes @ R.T), b, q))
        assert abs(a - r) < 1e-9


def test_quadrature_convergence_smooth_field():
    def field(x):
        return 1.0 / np.linalg.norm(x - np.array([2.5, 0.5, -1.0]), axis=-1)

    for k in range(5):
        b = build_basis(3, k)
        q1, q2 = build_quadrature(3, 24), build_quadrature(3, 40)
        c1, c2 = project(field(q1.nodes), b, q1), project(field(q2.nodes), b, q2)
        assert np.abs(c1 - c2).max() < 1e-10


def test_reconstruct_roundtrip():
    q = build_quadrature(3, 14)
    b = build_basis(3, 3)
    coeffs = np.arange(1.0, 8.0)
    vals = reconstruct(coeffs, b, q.nodes)
    np.testing.assert_allclose(project(vals, b, q), coeffs, atol=1e-12)
