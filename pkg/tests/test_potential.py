import math

import numpy as np
import pytest

from asymexp.decay import DecaySpec
from asymexp.errors import TailError, UnsupportedDimension
from asymexp.fields import ScalarField, constant_field
from asymexp.potential import (
    QuadSpec,
    check_radial_identity,
    decaying_bump,
    measure_decay,
    newtonian_potential,
    radial_identity_constant,
    radial_reference_potential,
    uniform_ball,
    verify_poisson,
)


def bump_profile(zeta):
    return lambda rho: (1.0 + rho * rho) ** (-zeta / 2)


def test_zero_field():
    f = constant_field(3, 0.0)
    assert newtonian_potential(f, [1.0, 2.0, 0.5], 20.0).value == 0.0


def test_uniform_ball_exterior_value():
    res = newtonian_potential(uniform_ball(), [4.0, 0.0, 0.0], 16.0)
    assert res.value == pytest.approx(-1.0 / 12, rel=1e-12)
    assert res.tail_bound == 0.0


def test_uniform_ball_interior_value():
    # inside a uniform ball: w = -(3 - r^2)/6
    res = newtonian_potential(uniform_ball(), [0.3, -0.2, 0.1], 16.0)
    r2 = 0.14
    assert res.value == pytest.approx(-(3 - r2) / 6, rel=1e-10)


@pytest.mark.parametrize("X", [0.0, 2.0, 10.0, 300.0])
def test_bump_matches_shell_theorem(X):
    f = decaying_bump(4.0)
    R = max(4 * X, 40.0)
    x = X * np.array([0.48, 0.6, 0.64])
    ref = radial_reference_potential(bump_profile(4.0), X, R) if X > 0 else -integrate_center(R)
    assert newtonian_potential(f, x, R).value == pytest.approx(ref, rel=1e-10)


def integrate_center(R):
    from scipy.integrate import quad

    return quad(lambda p: bump_profile(4.0)(p) * p, 0.0, R, epsrel=1e-13)[0]


def test_refined_quadrature_oracle():
    f = decaying_bump(4.0)
    x = [10.0, 0.0, 0.0]
    base = newtonian_potential(f, x, 400.0).value
    fine = newtonian_potential(f, x, 400.0, QuadSpec().refined(4)).value
    assert abs(base - fine) / abs(fine) < 1e-3
    assert abs(base - fine) / abs(fine) < 1e-12


def test_non_radial_field_matches_refined():
    def ev(y):
        return np.exp(-np.sum((y - np.array([0.5, -0.3, 0.2])) ** 2, axis=-1)) * (1 + y[..., 0])

    f = ScalarField(3, ev)
    x = np.array([1.5, 0.7, -0.4])
    a = newtonian_potential(f, x, 60.0).value
    b = newtonian_potential(f, x, 60.0, QuadSpec().refined(2)).value
    assert a == pytest.approx(b, rel=1e-9)


def test_region_split_recombines():
    f = decaying_bump(4.0)
    x = np.array([6.0, -2.0, 3.0])
    half = newtonian_potential(f, x, 100.0, split=0.5)
    third = newtonian_potential(f, x, 100.0, split=1 / 3)
    assert third.value == pytest.approx(half.value, rel=1e-10)
    assert sum(half.regions.values()) == pytest.approx(half.value, rel=1e-15)
    assert half.regions["E2"] != third.regions["E2"]


def test_linearity():
    f1, f2 = decaying_bump(4.0), uniform_ball(2.0)
    combo = ScalarField(3, lambda y: 2.0 * f1.eval(y) - 0.5 * f2.eval(y), radial_breaks=(2.0,))
    x = [3.0, 1.0, -1.0]
    w1 = newtonian_potential(f1, x, 40.0).value
    w2 = newtonian_potential(f2, x, 40.0).value
    w = newtonian_potential(combo, x, 40.0).value
    assert w == pytest.approx(2.0 * w1 - 0.5 * w2, rel=1e-12)


def test_determinism():
    f = decaying_bump(3.0)
    vals = {newtonian_potential(f, [5.0, 1.0, 2.0], 50.0).value for _ in range(3)}
    assert len(vals) == 1


def test_tail_bound_and_error():
    f = decaying_bump(2.5)
    res = newtonian_potential(f, [1.0, 0.0, 0.0], 100.0)
    C = 2 ** 1.25
    assert res.tail_bound == pytest.approx((4 / 3) * C * 100.0 ** -0.5 / 0.5)
    # the bound really bounds the neglected part
    full = radial_reference_potential(bump_profile(2.5), 1.0)
    assert abs(full - res.value) <= res.tail_bound
    with pytest.raises(TailError):
        newtonian_potential(f, [1.0, 0.0, 0.0], 100.0, tail_tol=1e-3)


def test_preconditions():
    with pytest.raises(UnsupportedDimension):
        newtonian_potential(decaying_bump(4.0, n=4), np.ones(4), 40.0)
    with pytest.raises(ValueError):
        newtonian_potential(decaying_bump(4.0), [10.0, 0.0, 0.0], 20.0)


def test_verify_poisson_fundamental_solution():
    def w(x):
        return -1.0 / (4 * math.pi * np.linalg.norm(x, axis=-1))

    chk = verify_poisson(w, constant_field(3, 0.0), [[5.0, 0.0, 0.0], [3.0, 4.0, 0.0]], h=1e-2)
    assert chk.residual < 1e-6 and chk.h2_scale == pytest.approx(1e-4)


def test_verify_poisson_quadratic():
    chk = verify_poisson(lambda x: np.sum(x * x, axis=-1) / 6, constant_field(3, 1.0),
                         [[2.0, 1.0, 0.0], [0.0, -3.0, 1.0]])
    assert chk.residual < 1e-8


def test_verify_poisson_ball_potential():
    f = uniform_ball()

    def w(x):
        return newtonian_potential(f, x, 40.0).value

    chk = verify_poisson(w, f, [[3.0, 0.0, 0.0], [1.0, 2.0, -2.0]])
    assert chk.residual < 1e-4


def test_verify_poisson_bump_potential():
    f = decaying_bump(4.0)

    def w(x):
        return newtonian_potential(f, x, 60.0).value

    chk = verify_poisson(w, f, [[2.0, 1.0, 0.5], [4.0, -3.0, 0.0]])
    assert chk.residual < 1e-4


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("zeta", [2.5, 3.5, 5.0])
def test_radial_identity(n, zeta):
    assert radial_identity_constant(n, zeta) == (2 - zeta) * (n - zeta)
    assert check_radial_identity(n, zeta) < 1e-6


def test_radial_identity_harmonic_case():
    # zeta = n: |x|^(2-n) is harmonic, c = 0
    assert radial_identity_constant(3, 3.0) == 0.0


@pytest.mark.slow
@pytest.mark.parametrize("zeta", [2.5, 3.0, 4.0])
def test_decay_dichotomy(zeta):
    spec = DecaySpec(zeta, 3)
    rep = measure_decay(decaying_bump(zeta))
    assert rep.p_hat == pytest.approx(spec.predicted_exponent, abs=0.1)
    assert rep.q_hat == int(spec.log_flag)
    assert set(rep.rss_by_q) == {0, 1}
