"""Manufactured exact solutions and the right-hand sides they induce.

The radial family is u = C1|x|^2/2 + C2|x|^(-k); the anisotropic family puts a
multiple of s^(2-n), s^2 = x^T DF(A)^(-1) x, on top of a quadratic, which the
frozen linear operator annihilates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OriginError
from .fields import DecayMeta, ScalarField
from .operator_core import (
    SymMatrix,
    TauParams,
    check_domain,
    eval_DF,
    eval_F,
    eval_F_increment,
    lower_bound,
    phi_increment,
    spd_power,
)

DEFAULT_ANNULUS = (2.0, 1e3)
DEFAULT_SHELLS = 64


@dataclass(frozen=True)
class RadialAnsatz:
    n: int
    C1: float
    C2: float
    k: float
    tau: TauParams
    r_range: tuple = DEFAULT_ANNULUS

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not self.k > 0:
            raise ValueError("decay exponent k must be positive")
        r = np.geomspace(self.r_range[0], self.r_range[1], DEFAULT_SHELLS)
        radial, tangential = self.eigenvalues(r)
        lam_min = np.minimum(radial, tangential)
        margin = lam_min - lower_bound(self.tau)
        if not np.all(margin > 0):
            bad = r[np.argmin(margin)]
            raise DomainError(
                f"ansatz leaves the {self.tau.branch.value} domain at r={bad:.4g}"
            )

    def eigenvalues(self, r):
        """(U'', U'/r): radial eigenvalue and the (n-1)-fold tangential one."""
        r = np.asarray(r, dtype=float)
        p = self.C2 * r ** (-self.k - 2)
        return self.C1 + self.k * (self.k + 1) * p, self.C1 - self.k * p

    def eigenvalue_shifts(self, r):
        r = np.asarray(r, dtype=float)
        p = self.C2 * r ** (-self.k - 2)
        return self.k * (self.k + 1) * p, -self.k * p

    @property
    def f_infinity(self) -> float:
        return eval_F(self.tau, SymMatrix.identity(self.n, self.C1))


def _radius(x):
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise OriginError("radial ansatz is singular at the origin")
    return r


def hessian_of_ansatz(a: RadialAnsatz, x):
    """U''(r) xx^T/r^2 + (U'(r)/r)(I - xx^T/r^2); SymMatrix for a single point."""
    x = np.asarray(x, dtype=float)
    r = _radius(x)
    rad, tan = a.eigenvalues(r)
    xh = x / r[..., None]
    P = xh[..., :, None] * xh[..., None, :]
    H = tan[..., None, None] * np.eye(a.n) + (rad - tan)[..., None, None] * P
    return SymMatrix(H) if x.ndim == 1 else H


def ansatz_field(a: RadialAnsatz) -> ScalarField:
    def ev(x):
        r = np.linalg.norm(x, axis=-1)
        return 0.5 * a.C1 * r**2 + a.C2 * r ** (-a.k)

    def gr(x):
        r = _radius(x)
        return (a.C1 - a.k * a.C2 * r ** (-a.k - 2))[..., None] * x

    def he(x):
        return hessian_of_ansatz(a, x) if np.ndim(x) > 1 else hessian_of_ansatz(a, x).array

    return ScalarField(a.n, ev, gr, he)


def induced_rhs(a: RadialAnsatz) -> ScalarField:
    """f = F_tau(lambda(D^2u)) for the radial ansatz.

    The deviation f - f(inf) is summed from per-eigenvalue increments so it
    keeps full relative precision far out, where it is many orders below f.
    """
    f_inf = a.f_infinity
    tau, n = a.tau, a.n

    def dev(x):
        r = _radius(np.asarray(x, dtype=float))
        d_rad, d_tan = a.eigenvalue_shifts(r)
        rad, tan = a.eigenvalues(r)
        bound = lower_bound(tau)
        if np.any(~(np.minimum(rad, tan) > bound)):
            raise DomainError("point outside the admissible annulus of the ansatz")
        return phi_increment(tau, a.C1, d_rad, n) + (n - 1) * phi_increment(tau, a.C1, d_tan, n)

    def ev(x):
        return f_inf + dev(x)

    meta = DecayMeta(f_infinity=f_inf, zeta_nominal=a.k + 2.0)
    return ScalarField(n, ev, decay_meta=meta, deviation=dev)


def _power_of_form(P, x, p):
    """phi = (x^T P x)^(p/2) with gradient and Hessian, vectorized."""
    Px = x @ P
    q = np.einsum("...i,...i->...", x, Px)
    val = q ** (p / 2)
    grad = (p * q ** (p / 2 - 1))[..., None] * Px
    hess = (p * q ** (p / 2 - 1))[..., None, None] * P + (
        p * (p - 2) * q ** (p / 2 - 2)
    )[..., None, None] * (Px[..., :, None] * Px[..., None, :])
    return val, grad, hess


def anisotropic_ansatz(A, C2: float, tau: TauParams, remainder_amplitude: float = 0.0) -> ScalarField:
    """u = x^T A x/2 + C2 s^(2-n) [+ C3 s^(2-2n)], s^2 = x^T DF(A)^(-1) x.

    The optional ``remainder_amplitude`` term gives the expansion a genuine
    remainder of order s^(2-2n); with it absent the remainder is identically
    zero.
    """
    A = SymMatrix(np.asarray(A))
    n = A.n
    if n < 3:
        raise ValueError("anisotropic ansatz needs n >= 3")
    rep = check_domain(tau, A)
    if not rep.admissible:
        raise DomainError(f"A is outside the {tau.branch.value} domain", rep)
    P = spd_power(eval_DF(tau, A), -1.0).array
    Aa = A.array
    terms = [(2.0 - n, float(C2))]
    if remainder_amplitude:
        terms.append((2.0 - 2.0 * n, float(remainder_amplitude)))

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = 0.5 * np.einsum("...i,ij,...j->...", x, Aa, x)
        for p, c in terms:
            out = out + c * _power_of_form(P, x, p)[0]
        return out

    def gr(x):
        x = np.asarray(x, dtype=float)
        out = x @ Aa
        for p, c in terms:
            out = out + c * _power_of_form(P, x, p)[1]
        return out

    def he(x):
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(Aa, x.shape[:-1] + (n, n)).copy()
        for p, c in terms:
            out = out + c * _power_of_form(P, x, p)[2]
        return out

    f_inf = eval_F(tau, A)
    return ScalarField(n, ev, gr, he, decay_meta=DecayMeta(f_inf, 2.0 * n))


def rhs_from_hessian(u: ScalarField, tau: TauParams, A, zeta_nominal: float) -> ScalarField:
    """f = F_tau(lambda(D^2u)) for any field with an analytic Hessian.

    The deviation from f(inf) = F_tau(lambda(A)) goes through the mean-value
    identity so that it stays accurate when D^2u - A is tiny.
    """
    if u.hess is None:
        raise ValueError("field has no analytic Hessian")
    A = np.asarray(A.array if isinstance(A, SymMatrix) else A, dtype=float)
    f_inf = eval_F(tau, A)

    def dev(x):
        return eval_F_increment(tau, A, u.hess(np.asarray(x, dtype=float)) - A)

    def ev(x):
        return eval_F(tau, u.hess(np.asarray(x, dtype=float)))

    return ScalarField(u.dim, ev, decay_meta=DecayMeta(f_inf, zeta_nominal), deviation=dev)


def radial_shells(r_min=DEFAULT_ANNULUS[0], r_max=DEFAULT_ANNULUS[1], count=DEFAULT_SHELLS):
    return np.geomspace(r_min, r_max, count)


def isotropic_equivalent(A_scale: float, C2: float, tau: TauParams, n: int) -> RadialAnsatz:
    """Radial ansatz equal to anisotropic_ansatz(A_scale*I, C2, tau)."""
    dphi = float(np.asarray(eval_DF(tau, SymMatrix.identity(n, A_scale)).array)[0, 0])
    return RadialAnsatz(n, A_scale, C2 * dphi ** ((n - 2) / 2), n - 2.0, tau)


__all__ = [
    "RadialAnsatz",
    "hessian_of_ansatz",
    "ansatz_field",
    "induced_rhs",
    "anisotropic_ansatz",
    "rhs_from_hessian",
    "radial_shells",
    "isotropic_equivalent",
    "DEFAULT_ANNULUS",
]

