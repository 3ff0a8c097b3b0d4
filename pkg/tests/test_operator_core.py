import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asymexp.errors import DimensionError, DomainError, NotSPDError
from asymexp.operator_core import (
    Branch,
    SymMatrix,
    TauParams,
    branch_phi,
    check_domain,
    eval_DF,
    eval_F,
    eval_F_increment,
    jacobi_eigh,
    mean_derivative,
    phi_increment,
    spd_inv_sqrt,
)
from asymexp.sampling import (
    BRANCH_TAUS,
    fd_matrix_gradient,
    random_admissible,
    random_orthogonal,
)

# mpmath at 40 digits: (sqrt(a^2+1)/2b) sum ln((l+a-b)/(l+a+b)), a=sqrt3, b=sqrt2
F_PI6_DIAG123 = -1.810464698954811213910309060124183191479


@pytest.mark.parametrize(
    "tau, branch",
    [
        (0.0, Branch.MONGE_AMPERE),
        (math.pi / 8, Branch.SMALL_TAU),
        (math.pi / 4, Branch.INVERSE),
        (3 * math.pi / 8, Branch.LARGE_TAU),
        (math.pi / 2, Branch.SPECIAL_LAGRANGIAN),
    ],
)
def test_branch_selection(tau, branch):
    assert TauParams(tau).branch is branch


def test_tau_constants():
    for tau in (math.pi / 6, math.pi / 8, 3 * math.pi / 8, math.pi / 3):
        p = TauParams(tau)
        a = 1.0 / math.tan(tau)
        assert p.a == pytest.approx(a, rel=1e-14)
        assert p.b == pytest.approx(math.sqrt(abs(a * a - 1)), rel=1e-14)
    assert TauParams(0.0).a is None and TauParams(math.pi / 2).b is None


@pytest.mark.parametrize("tau", [-0.1, 2.0, float("nan")])
def test_tau_out_of_range(tau):
    with pytest.raises(ValueError):
        TauParams(tau)


def test_jacobi_reconstruction_and_orthogonality():
    rng = np.random.default_rng(1)
    for n in (2, 3, 5, 6):
        X = rng.standard_normal((50, n, n)) * 4
        X = X + np.swapaxes(X, 1, 2)
        w, V = jacobi_eigh(X)
        recon = np.einsum("kij,kj,klj->kil", V, w, V)
        norm_inf = np.abs(X).max(axis=(1, 2))
        assert np.all(np.abs(recon - X).max(axis=(1, 2)) <= 1e-12 * (1 + norm_inf))
        VtV = np.einsum("kji,kjl->kil", V, V)
        assert np.abs(VtV - np.eye(n)).max() <= 1e-12
        assert np.all(np.diff(w, axis=1) >= 0)


def test_symmatrix_upper_roundtrip():
    M = SymMatrix.from_upper(3, [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(M.array, [[1, 2, 3], [2, 4, 5], [3, 5, 6]])
    np.testing.assert_array_equal(M.upper, [1, 2, 3, 4, 5, 6])
    with pytest.raises(DimensionError):
        SymMatrix([[1.0]])
    with pytest.raises(ValueError):
        SymMatrix([[1, 2], [0, 1]])


def test_eval_F_examples():
    I3 = SymMatrix.identity(3)
    assert eval_F(TauParams(0.0), I3) == 0.0
    assert eval_F(TauParams(math.pi / 2), I3) == pytest.approx(3 * math.pi / 4, abs=1e-15)
    assert eval_F(TauParams(math.pi / 4), np.zeros((3, 3))) == pytest.approx(-3 * math.sqrt(2), abs=1e-14)
    val = eval_F(TauParams(math.pi / 6), SymMatrix.diag([1, 2, 3]))
    assert val == pytest.approx(F_PI6_DIAG123, rel=1e-14)


def test_eval_F_domain_and_dimension_errors():
    with pytest.raises(DomainError) as exc:
        eval_F(TauParams(0.0), SymMatrix.diag([1, -1, 1]))
    assert exc.value.report is not None and not exc.value.report.admissible
    with pytest.raises(DimensionError):
        eval_F(TauParams(0.0), np.ones((1, 1)))


def test_eval_DF_examples():
    D = eval_DF(TauParams(math.pi / 2), SymMatrix.identity(3))
    np.testing.assert_allclose(D.array, 0.5 * np.eye(3), atol=1e-15)
    D = eval_DF(TauParams(0.0), SymMatrix.diag([1, 2]))
    np.testing.assert_allclose(D.array, np.diag([0.5, 0.25]), atol=1e-15)


def test_eval_DF_matches_finite_differences_pi8():
    rng = np.random.default_rng(8)
    tau = TauParams(math.pi / 8)
    for _ in range(5):
        M = random_admissible(tau, 3, rng)
        G = eval_DF(tau, M)
        fd = fd_matrix_gradient(tau, M, step=1e-5)
        assert np.abs(fd - G).max() / np.abs(G).max() < 1e-6


def test_eval_DF_repeated_eigenvalues():
    tau = TauParams(math.pi / 8)
    R = random_orthogonal(4, np.random.default_rng(3))
    M = (R * np.array([1.0, 1.0, 1.0, 2.5])) @ R.T
    M = 0.5 * (M + M.T)
    G = eval_DF(tau, M)
    assert np.abs(fd_matrix_gradient(tau, M) - G).max() / np.abs(G).max() < 1e-6


def test_check_domain_examples():
    r = check_domain(TauParams(0.0), SymMatrix.identity(3))
    assert r.admissible and r.margin == pytest.approx(1.0)
    r = check_domain(TauParams(math.pi / 4), SymMatrix.identity(3, -1.0))
    assert not r.admissible and r.margin == 0.0
    # -0.3 > -sqrt3 + sqrt2 = -0.31783...
    r = check_domain(TauParams(math.pi / 6), SymMatrix.diag([-0.3, 1, 1]))
    assert r.admissible
    assert r.margin == pytest.approx(0.01783724519578225582798786354773969260946, rel=1e-12)
    r = check_domain(TauParams(math.pi / 2), SymMatrix.identity(3, -50.0))
    assert r.admissible and math.isinf(r.margin)


def test_spd_inv_sqrt_examples():
    np.testing.assert_allclose(spd_inv_sqrt(SymMatrix.identity(3, 4.0)).array, 0.5 * np.eye(3), atol=1e-15)
    np.testing.assert_allclose(
        spd_inv_sqrt(SymMatrix.diag([1, 4, 9])).array, np.diag([1, 0.5, 1 / 3]), atol=1e-15
    )
    rng = np.random.default_rng(5)
    X = rng.standard_normal((4, 4))
    M = X @ X.T + 0.5 * np.eye(4)
    N = spd_inv_sqrt(M).array
    np.testing.assert_allclose(N @ N @ M, np.eye(4), atol=1e-9)
    np.testing.assert_allclose(N, N.T)
    with pytest.raises(NotSPDError):
        spd_inv_sqrt(SymMatrix.diag([1, 0, 2]))


@pytest.mark.parametrize("tau", BRANCH_TAUS)
def test_orthogonal_invariance(tau):
    tau = TauParams(tau)
    rng = np.random.default_rng(11)
    for _ in range(10):
        M = random_admissible(tau, 4, rng)
        R = random_orthogonal(4, rng)
        RMR = R.T @ M @ R
        assert abs(eval_F(tau, RMR) - eval_F(tau, M)) < 1e-10
        lhs = eval_DF(tau, RMR).array
        rhs = R.T @ eval_DF(tau, M).array @ R
        assert np.abs(lhs - rhs).max() < 1e-9


@pytest.mark.parametrize("tau", BRANCH_TAUS)
def test_df_positive_definite(tau):
    tau = TauParams(tau)
    rng = np.random.default_rng(2)
    stack = np.array([random_admissible(tau, 3, rng) for _ in range(30)])
    w = np.linalg.eigvalsh(eval_DF(tau, stack))
    assert np.all(w > 0)


@settings(max_examples=60, deadline=None)
@given(
    tau_idx=st.integers(0, 4),
    seed=st.integers(0, 2**32 - 1),
    bump=st.floats(0.0, 2.0),
)
def test_monotone_under_psd_increase(tau_idx, seed, bump):
    tau = TauParams(BRANCH_TAUS[tau_idx])
    rng = np.random.default_rng(seed)
    M1 = random_admissible(tau, 3, rng)
    v = rng.standard_normal(3)
    M2 = M1 + bump * np.outer(v, v) / (v @ v)
    assert eval_F(tau, M2) >= eval_F(tau, M1) - 1e-12


@settings(max_examples=60, deadline=None)
@given(tau_idx=st.sampled_from([1, 2]), seed=st.integers(0, 2**32 - 1))
def test_concave_along_segments(tau_idx, seed):
    tau = TauParams(BRANCH_TAUS[tau_idx])
    rng = np.random.default_rng(seed)
    M1, M2 = random_admissible(tau, 3, rng), random_admissible(tau, 3, rng)
    t = np.linspace(0.0, 1.0, 9)
    vals = np.array([eval_F(tau, (1 - s) * M1 + s * M2) for s in t])
    assert np.all(vals[:-2] - 2 * vals[1:-1] + vals[2:] <= 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_special_lagrangian_concave_on_psd_cone(seed):
    tau = TauParams(math.pi / 2)
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(2):
        R = random_orthogonal(3, rng)
        mats.append((R * rng.uniform(0, 3, 3)) @ R.T)
    t = np.linspace(0.0, 1.0, 9)
    vals = np.array([eval_F(tau, (1 - s) * mats[0] + s * mats[1]) for s in t])
    assert np.all(vals[:-2] - 2 * vals[1:-1] + vals[2:] <= 1e-12)


@pytest.mark.parametrize("tau", BRANCH_TAUS)
def test_phi_increment_matches_difference(tau):
    tau = TauParams(tau)
    base = np.array([0.7, 1.0, 2.5])
    delta = np.array([0.3, -0.2, 1.1])
    direct = branch_phi(tau, base + delta, 3) - branch_phi(tau, base, 3)
    np.testing.assert_allclose(phi_increment(tau, base, delta, 3), direct, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("tau", BRANCH_TAUS)
def test_mean_value_identity(tau):
    tau = TauParams(tau)
    rng = np.random.default_rng(4)
    A = random_admissible(tau, 3, rng, min_margin=1.0)
    H = 0.3 * random_orthogonal(3, rng) @ np.diag([0.5, -0.2, 0.1]) @ random_orthogonal(3, rng).T
    H = 0.5 * (H + H.T)
    inc = eval_F_increment(tau, A, H)
    assert inc == pytest.approx(eval_F(tau, A + H) - eval_F(tau, A), rel=1e-10, abs=1e-14)
    np.testing.assert_allclose(mean_derivative(tau, A, np.zeros((3, 3))), eval_DF(tau, A).array)


def test_small_tau_eigen_map_range():
    tau = TauParams(math.pi / 6)
    lam = -tau.a + tau.b + np.random.default_rng(0).uniform(1e-6, 50, 200)
    mapped = (lam + tau.a - tau.b) / (lam + tau.a + tau.b)
    assert np.all((mapped > 0) & (mapped < 1))
