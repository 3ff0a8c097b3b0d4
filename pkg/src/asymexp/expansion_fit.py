"""Asymptotic expansion of exterior solutions: quadratic part, anisotropic
frame, harmonic coefficients and remainder rates.

Far out, u = Q + sum_k c_k(theta) s^(2-n-k) + remainder with
Q = x^T A x / 2 + b.x + c, s^2 = x^T DF(A)^(-1) x and
theta = DF(A)^(-1/2) x / s.  In the coordinates y = DF(A)^(-1/2) x the
terms s^(2-n-k) Y_k(theta) are harmonic, so the frozen operator
tr(DF(A) D^2 .) annihilates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .decay import DecayReport, fit_decay
from .errors import DegreeOverflow, DomainError, NonConvergent, RegimeError
from .fields import ScalarField
from .operator_core import (
    SymMatrix,
    TauParams,
    check_domain,
    eval_DF,
    eval_F,
    mean_derivative,
    spd_power,
)
from .sampling import fd_hessian
from .sphharm import build_basis, build_quadrature, project, reconstruct, sphere_area

EPS = np.finfo(float).eps
INTEGER_TOL = 1e-9
# powers of s carried by each harmonic degree of a quadratic polynomial
# (constant: s^0, linear: s^1, quadratic form: s^2 in degrees 0 and 2)
QUADRATIC_POWERS = {0: (0, 2), 1: (1,), 2: (2,)}


def _euclidean_nodes(n, degree=12):
    return build_quadrature(n, degree)


# ---------------------------------------------------------- quadratic part


@dataclass(frozen=True, eq=False)
class QuadraticPolynomial:
    A: SymMatrix
    b: np.ndarray
    c: float
    F_A: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        Aa = self.A.array
        return 0.5 * np.einsum("...i,ij,...j->...", x, Aa, x) + x @ self.b + self.c

    def grad(self, x):
        return np.asarray(x, dtype=float) @ self.A.array + self.b

    def to_dict(self):
        return {
            "A": self.A.array.tolist(),
            "b": self.b.tolist(),
            "c": self.c,
            "F_A": self.F_A,
        }


def _extrapolate(r, means, floor):
    """Richardson extrapolation of shell means m(r) = m_inf + C r^-eps.

    eps is fitted from successive differences; when they sit at the floor
    the outermost mean is returned unchanged with eps = None.
    """
    means = np.asarray(means, dtype=float)
    diffs = np.diff(means, axis=0).reshape(len(r) - 1, -1)
    size = np.linalg.norm(diffs, axis=1)
    keep = size > floor
    if np.count_nonzero(keep) < 2:
        return means[-1], None
    lr = np.log(r[:-1][keep])
    slope = np.polyfit(lr, np.log(size[keep]), 1)[0]
    eps = -float(slope)
    if not eps > 0:
        return means[-1], eps
    wN, wM = r[-1] ** eps, r[-2] ** eps
    return (means[-1] * wN - means[-2] * wM) / (wN - wM), eps


def estimate_quadratic(u: ScalarField, tau: TauParams, shells, quad_degree: int = 12,
                       fd_step: float = 1e-3) -> QuadraticPolynomial:
    """Recover Q = x^T A x / 2 + b.x + c from shell averages of u far out.

    A extrapolates the shell means of D^2u in their fitted decay exponent,
    b and c do the same for Du - Ax and u - x^T A x/2 - b.x.
    """
    r = np.sort(np.asarray(shells, dtype=float))
    if len(r) < 3 or r[-1] / r[0] < 10 * (1 - 1e-12):
        raise ValueError("need at least 3 shells spanning one decade")
    n = u.dim
    quad = _euclidean_nodes(n, quad_degree)
    wts = quad.weights / quad.weights.sum()
    pts = [ri * quad.nodes for ri in r]

    def hess(x):
        if u.hess is not None:
            return u.hess(x)
        return fd_hessian(u.eval, x, fd_step * np.linalg.norm(x[0]))

    H = [hess(x) for x in pts]
    hscale = max(1.0, float(np.abs(H[-1]).max()))
    floor = 64 * EPS * hscale
    if u.hess is None:
        # second differences divide the round-off of u by step^2
        floor = max(floor, 1e3 * EPS * float(np.abs(u.eval(pts[-1])).max()) / (fd_step * r[-1]) ** 2)
    Hbar = np.array([np.einsum("k,kij->ij", wts, h) for h in H])
    A, eps = _extrapolate(r, Hbar, floor)
    A = 0.5 * (A + A.T)

    drift = np.array([float(np.abs(h - A).max()) for h in H])
    if eps is not None and not eps > 0:
        raise NonConvergent(f"shell means of D^2u do not settle (fitted exponent {eps:.3g})")
    if drift[-1] > floor and drift[-1] > drift[0]:
        raise NonConvergent(
            f"Hessian drift grows outward ({drift[0]:.3e} at r={r[0]:.3g}, "
            f"{drift[-1]:.3e} at r={r[-1]:.3g})"
        )

    if u.grad is not None:
        G = [u.grad(x) - x @ A for x in pts]
    else:
        G = [np.stack([(u.eval(x + e) - u.eval(x - e)) / (2 * fd_step) for e in np.eye(n) * fd_step], -1)
             - x @ A for x in pts]
    gscale = max(1.0, float(np.abs(A).max()) * r[-1])
    b, eps_b = _extrapolate(r, np.array([wts @ g for g in G]), 64 * EPS * gscale)

    C = [u.eval(x) - 0.5 * np.einsum("ki,ij,kj->k", x, A, x) - x @ b for x in pts]
    cscale = max(1.0, float(np.abs(A).max()) * r[-1] ** 2)
    c, eps_c = _extrapolate(r, np.array([[wts @ v] for v in C]), 64 * EPS * cscale)

    Asym = SymMatrix(A)
    rep = check_domain(tau, Asym)
    if not rep.admissible:
        raise DomainError(f"estimated A is outside the {tau.branch.value} domain", rep)
    diag = {
        "shells": r.tolist(),
        "hessian_drift": drift.tolist(),
        "epsilon": eps,
        "epsilon_b": eps_b,
        "epsilon_c": eps_c,
    }
    return QuadraticPolynomial(Asym, np.asarray(b, dtype=float), float(np.ravel(c)[0]),
                               float(eval_F(tau, Asym)), diag)


# ---------------------------------------------------------------- frame


@dataclass(frozen=True, eq=False)
class AnisotropicFrame:
    DF: SymMatrix
    M_inv: SymMatrix
    Q_half_inv: SymMatrix
    Q_half: SymMatrix

    @classmethod
    def build(cls, tau: TauParams, A) -> "AnisotropicFrame":
        DF = eval_DF(tau, A)
        return cls(DF, spd_power(DF, -1.0), spd_power(DF, -0.5), spd_power(DF, 0.5))

    @property
    def n(self):
        return self.DF.n

    def s(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.M_inv.array, x))

    def theta(self, x):
        x = np.asarray(x, dtype=float)
        return (x @ self.Q_half_inv.array) / self.s(x)[..., None]

    def point(self, s0, theta):
        """The x with s(x) = s0 and theta(x) = theta."""
        return s0 * (np.asarray(theta, dtype=float) @ self.Q_half.array)


# ------------------------------------------------------------ expansion


def degree_bound(n: int, zeta: float) -> int:
    """Largest admissible expansion degree K."""
    if zeta > 2 * n:
        return n - 1
    return n - math.floor(2 * n - zeta + INTEGER_TOL) - 1


def log_flag(n: int, zeta: float) -> bool:
    m = min(2 * n, zeta) - n
    return m > -INTEGER_TOL and abs(m - round(m)) < INTEGER_TOL


@dataclass(frozen=True, eq=False)
class ExpansionResult:
    quadratic: QuadraticPolynomial
    frame: AnisotropicFrame
    c0: float
    ck: list
    K: int
    remainder_report: DecayReport
    per_shell_diagnostics: list
    shells: np.ndarray
    remainder_rms: np.ndarray
    residual_rms: np.ndarray
    predicted_exponent: float
    log_flag: bool
    zeta: float
    labels: list = field(default_factory=list)
    quadratic_correction: dict = field(default_factory=dict)
    coefficient_at_floor: list = field(default_factory=list)
    coefficient_noise: list = field(default_factory=list)

    @property
    def explained_fraction(self) -> float:
        """Share of |u - Q| (RMS over shells) carried by the fitted terms."""
        fitted = np.sqrt(np.mean((self.residual_rms - self.remainder_rms) ** 2))
        total = np.sqrt(np.mean(self.residual_rms**2))
        return float(fitted / total) if total > 0 else 0.0

    def terms(self, x):
        """sum_k c_k(theta) s^(2-n-k) at points x."""
        x = np.asarray(x, dtype=float)
        n = self.frame.n
        s, th = self.frame.s(x), self.frame.theta(x)
        out = np.zeros(x.shape[:-1])
        for k, coeffs in enumerate(self.ck):
            out = out + reconstruct(coeffs, build_basis(n, k), th) * s ** (2.0 - n - k)
        return out

    def to_dict(self):
        return {
            "quadratic": self.quadratic.to_dict(),
            "c0": self.c0,
            "ck": [np.asarray(c).tolist() for c in self.ck],
            "K": self.K,
            "zeta": self.zeta,
            "predicted_exponent": self.predicted_exponent,
            "log_flag": self.log_flag,
            "quadratic_correction": {str(k): v for k, v in self.quadratic_correction.items()},
            "coefficient_at_floor": list(self.coefficient_at_floor),
            "coefficient_noise": list(self.coefficient_noise),
            "remainder": {
                "p_hat": self.remainder_report.p_hat,
                "q_hat": self.remainder_report.q_hat,
                "rss": self.remainder_report.rss,
                "below_floor": self.remainder_report.below_floor,
            },
            "diagnostics": [
                {"shell_radius": float(s), "residual_rms": float(a), "remainder_rms": float(b)}
                for s, a, b in zip(self.shells, self.residual_rms, self.remainder_rms)
            ],
        }

    def csv_rows(self):
        """Long-format rows (shell_radius, degree, coefficient_index, value)."""
        return [dict(row) for row in self.per_shell_diagnostics]


def fit_expansion(u: ScalarField, quadratic: QuadraticPolynomial, tau: TauParams, zeta: float,
                  shells, K: Optional[int] = None, quad_degree: Optional[int] = None,
                  floor_factor: float = 32.0) -> ExpansionResult:
    """Fit c_0 .. c_K on frame shells s = s0 and measure the remainder rate.

    Each degree-k projection of (u - Q) s0^(n-2+k) is c_k plus a term of
    order s0^-(min(2n, zeta) - n - k) (times ln s0 in the log case); the
    coefficient is the constant of a least-squares fit of that model over
    the shells.
    """
    n = u.dim
    bound = degree_bound(n, zeta)
    if K is None:
        K = max(bound, 0)
    if K < 0 or K > bound:
        raise DegreeOverflow(f"degree {K} exceeds the bound {bound} for n={n}, zeta={zeta}")
    s0 = np.sort(np.asarray(shells, dtype=float))
    frame = AnisotropicFrame.build(tau, quadratic.A)
    quad = build_quadrature(n, quad_degree or max(2 * K + 8, 12))
    bases = [build_basis(n, k) for k in range(K + 1)]
    theta = quad.nodes
    area = sphere_area(n)
    lflag = log_flag(n, zeta)
    top = min(2 * n, zeta)

    R = []
    floors = []
    for s in s0:
        x = frame.point(s, theta)
        ux = u.eval(x)
        R.append(ux - quadratic(x))
        floors.append(floor_factor * EPS * max(float(np.abs(ux).max()), 1e-300))
    R = np.array(R)
    floors = np.array(floors)

    ck, rows, labels = [], [], []
    ls = np.log(s0)
    nuisance, correction = [], {}
    at_floor, noise_levels = [], []
    for k, basis in enumerate(bases):
        per_shell = project(R * s0[:, None] ** (n - 2 + k), basis, quad)
        gamma = top - n - k
        cols = [np.ones_like(s0), s0 ** (-gamma)]
        if lflag:
            cols.append(s0 ** (-gamma) * ls)
        # growing columns absorb small errors in the supplied Q
        powers = QUADRATIC_POWERS.get(k, ())
        cols += [s0 ** (p + n - 2 + k) for p in powers]
        design = np.column_stack(cols)
        scale = np.abs(design).max(axis=0)
        pinv = np.linalg.pinv(design / scale) / scale[:, None]
        coef = pinv @ per_shell
        # round-off in u - Q, carried through the projection and the fit
        noise = float(np.abs(pinv[0]) @ (floors * s0 ** (n - 2 + k) * math.sqrt(area)))
        at_floor.append(bool(np.abs(coef[0]).max() <= noise))
        noise_levels.append(noise)
        ck.append(np.zeros_like(coef[0]) if at_floor[-1] else coef[0])
        tail = coef[len(cols) - len(powers):]
        nuisance.append(list(zip(powers, tail)))
        if powers:
            correction[k] = float(np.abs(tail).max())
        labels.append(list(basis.labels))
        for i, s in enumerate(s0):
            for m in range(basis.size):
                rows.append({"shell_radius": float(s), "degree": k, "coefficient_index": m,
                             "value": float(per_shell[i, m])})

    c0 = float(ck[0][0] / math.sqrt(area))
    wn = quad.weights / area
    rem_rms, res_rms = [], []
    for i, s in enumerate(s0):
        fitted = 0.0
        for k in range(K + 1):
            Y = bases[k](theta)
            fitted = fitted + (Y @ ck[k]) * s ** (2.0 - n - k)
            for p, c in nuisance[k]:
                fitted = fitted + (Y @ c) * s**p
        rem = R[i] - fitted
        rem_rms.append(math.sqrt(float(wn @ (rem * rem))))
        res_rms.append(math.sqrt(float(wn @ (R[i] * R[i]))))
    rem_rms, res_rms = np.array(rem_rms), np.array(res_rms)
    report = fit_decay(s0, rem_rms, allow_log=True, floor=floors)

    return ExpansionResult(
        quadratic=quadratic,
        frame=frame,
        c0=c0,
        ck=ck,
        K=K,
        remainder_report=report,
        per_shell_diagnostics=rows,
        shells=s0,
        remainder_rms=rem_rms,
        residual_rms=res_rms,
        predicted_exponent=top - 2.0,
        log_flag=lflag,
        zeta=float(zeta),
        labels=labels,
        quadratic_correction=correction,
        coefficient_at_floor=at_floor,
        coefficient_noise=noise_levels,
    )


def subtract_expansion(u: ScalarField, result: ExpansionResult) -> ScalarField:
    """u minus its fitted expansion terms (the quadratic part is kept)."""
    return ScalarField(u.dim, lambda x: u.eval(x) - result.terms(x))


# ---------------------------------------------------------- verification


def _zeta_of(f: Optional[ScalarField], zeta):
    if zeta is not None:
        return float(zeta)
    if f is None or f.decay_meta is None:
        raise ValueError("zeta is required when f carries no decay metadata")
    return float(f.decay_meta.zeta_nominal)


@dataclass(frozen=True)
class RateCheck:
    name: str
    bound: float
    report: DecayReport
    passed: bool

    def to_dict(self):
        return {"name": self.name, "bound": self.bound, "p_hat": self.report.p_hat,
                "q_hat": self.report.q_hat, "below_floor": self.report.below_floor,
                "passed": self.passed}


@dataclass(frozen=True, eq=False)
class TheoremReport:
    theorem: str
    zeta: float
    slack: float
    checks: list
    quadratic: QuadraticPolynomial
    expansion: Optional[ExpansionResult] = None
    f_infinity_error: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self):
        out = {
            "theorem": self.theorem,
            "zeta": self.zeta,
            "slack": self.slack,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "quadratic": self.quadratic.to_dict(),
            "f_infinity_error": self.f_infinity_error,
        }
        if self.expansion is not None:
            out["expansion"] = self.expansion.to_dict()
        return out


def _rate_check(name, bound, r, values, floors, slack):
    rep = fit_decay(r, values, allow_log=True, floor=floors)
    ok = rep.below_floor or rep.p_hat >= bound - slack
    return RateCheck(name, bound, rep, bool(ok))


def _f_inf_error(f, quadratic):
    if f is None or f.decay_meta is None:
        return None
    return abs(quadratic.F_A - f.decay_meta.f_infinity)


DEFAULT_QUAD_SHELLS = tuple(np.geomspace(1e2, 1e3, 8))
DEFAULT_RATE_SHELLS = tuple(np.geomspace(4.0, 400.0, 16))
DEFAULT_FRAME_SHELLS = tuple(np.geomspace(2.0, 100.0, 12))


def verify_theorem1(u: ScalarField, f: Optional[ScalarField], tau: TauParams, zeta=None,
                    shells=DEFAULT_RATE_SHELLS, slack: float = 0.1,
                    quad_shells=DEFAULT_QUAD_SHELLS) -> TheoremReport:
    """Decay of |u - Q|, |D(u - Q)|, |D^2(u - Q)| against 2 - min(n, zeta) - j.

    Derivatives use the field's analytic gradient and Hessian when present:
    finite differences of u - Q lose the decaying part to cancellation.
    """
    zeta = _zeta_of(f, zeta)
    n = u.dim
    Q = estimate_quadratic(u, tau, quad_shells)
    r = np.asarray(shells, dtype=float)
    quad = _euclidean_nodes(n, 8)
    base = min(n, zeta)
    vals = np.zeros((3, len(r)))
    floors = np.zeros((3, len(r)))
    for i, ri in enumerate(r):
        x = ri * quad.nodes
        ux = u.eval(x)
        vals[0, i] = np.abs(ux - Q(x)).max()
        floors[0, i] = 32 * EPS * np.abs(ux).max()
        g = u.grad(x) if u.grad is not None else None
        if g is not None:
            vals[1, i] = np.linalg.norm(g - Q.grad(x), axis=-1).max()
            floors[1, i] = 32 * EPS * np.abs(g).max()
        h = u.hess(x) if u.hess is not None else fd_hessian(u.eval, x, 1e-3 * ri)
        vals[2, i] = np.abs(h - Q.A.array).max()
        floors[2, i] = 32 * EPS * np.abs(h).max()
    checks = [_rate_check("u-Q", base - 2.0, r, vals[0], floors[0], slack)]
    if u.grad is not None:
        checks.append(_rate_check("D(u-Q)", base - 1.0, r, vals[1], floors[1], slack))
    checks.append(_rate_check("D2(u-Q)", base, r, vals[2], floors[2], slack))
    return TheoremReport("quadratic_asymptotics", zeta, slack, checks, Q, None, _f_inf_error(f, Q))


def verify_theorem2(u: ScalarField, f: Optional[ScalarField], tau: TauParams, zeta=None,
                    shells=DEFAULT_FRAME_SHELLS, K: Optional[int] = None, slack: float = 0.1,
                    quad_shells=DEFAULT_QUAD_SHELLS) -> TheoremReport:
    """Fit the expansion and check the remainder decays at least like
    s^(2 - min(2n, zeta)) (up to a log)."""
    zeta = _zeta_of(f, zeta)
    n = u.dim
    if not zeta > n:
        raise RegimeError(f"the expansion needs zeta > n (zeta={zeta}, n={n})")
    Q = estimate_quadratic(u, tau, quad_shells)
    res = fit_expansion(u, Q, tau, zeta, shells, K)
    rep = res.remainder_report
    ok = rep.below_floor or rep.p_hat >= res.predicted_exponent - slack
    check = RateCheck("remainder", res.predicted_exponent, rep, bool(ok))
    return TheoremReport("harmonic_expansion", zeta, slack, [check], Q, res, _f_inf_error(f, Q))


def freeze_coefficients(u: ScalarField, tau: TauParams, A, x):
    """a_bar(x) = int_0^1 DF(A + t (D^2u(x) - A)) dt (8-point Gauss-Legendre).

    With v = u - Q this satisfies a_bar : D^2 v = f(x) - f(inf) exactly.
    """
    A = np.asarray(A.array if isinstance(A, SymMatrix) else A, dtype=float)
    x = np.asarray(x, dtype=float)
    H = u.hess(x) if u.hess is not None else fd_hessian(u.eval, x, 1e-3)
    out = mean_derivative(tau, A, H - A)
    return SymMatrix(out) if out.ndim == 2 else out
