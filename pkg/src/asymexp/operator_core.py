"""The operator family F_tau acting on Hessian eigenvalues.

Matrices are handled either as :class:`SymMatrix` values or as plain numpy
arrays of shape ``(n, n)`` / ``(..., n, n)``; every evaluation routine accepts
stacks so that whole shells of sample points are processed in one call.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, NotSPDError

SQRT2 = math.sqrt(2.0)

__all__ = [
    "Branch",
    "TauParams",
    "SymMatrix",
    "DomainReport",
    "jacobi_eigh",
    "branch_phi",
    "branch_dphi",
    "phi_increment",
    "lower_bound",
    "eval_F",
    "eval_DF",
    "check_domain",
    "spd_inv_sqrt",
    "spd_power",
    "mean_derivative",
    "eval_F_increment",
]


class Branch(enum.Enum):
    MONGE_AMPERE = "MongeAmpere"
    SMALL_TAU = "SmallTau"
    INVERSE = "Inverse"
    LARGE_TAU = "LargeTau"
    SPECIAL_LAGRANGIAN = "SpecialLagrangian"


@dataclass(frozen=True)
class TauParams:
    """Branch parameter tau together with a = cot(tau), b = sqrt(|a^2 - 1|).

    ``a`` and ``b`` are ``None`` on the two endpoint branches.
    """

    tau: float
    branch: Branch = field(init=False)
    a: float | None = field(init=False)
    b: float | None = field(init=False)

    def __post_init__(self):
        tau = float(self.tau)
        if not (0.0 <= tau <= math.pi / 2) or math.isnan(tau):
            raise ValueError(f"tau must lie in [0, pi/2], got {self.tau!r}")
        object.__setattr__(self, "tau", tau)
        if tau == 0.0:
            branch = Branch.MONGE_AMPERE
        elif tau == math.pi / 2:
            branch = Branch.SPECIAL_LAGRANGIAN
        elif tau == math.pi / 4:
            branch = Branch.INVERSE
        elif tau < math.pi / 4:
            branch = Branch.SMALL_TAU
        else:
            branch = Branch.LARGE_TAU
        object.__setattr__(self, "branch", branch)
        if branch in (Branch.SMALL_TAU, Branch.INVERSE, Branch.LARGE_TAU):
            a = math.cos(tau) / math.sin(tau)
            b = math.sqrt(abs(a * a - 1.0))
        else:
            a = b = None
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def prefactor(self) -> float:
        """sqrt(a^2+1)/(2b) on SmallTau, sqrt(a^2+1)/b on LargeTau."""
        if self.branch is Branch.SMALL_TAU:
            return math.sqrt(self.a**2 + 1.0) / (2.0 * self.b)
        if self.branch is Branch.LARGE_TAU:
            return math.sqrt(self.a**2 + 1.0) / self.b
        raise AttributeError(f"no prefactor on branch {self.branch.value}")


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = 64):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix or stack.

    Returns ``(w, V)`` with eigenvalues ascending along the last axis and the
    orthonormal eigenvectors in the columns of ``V``.  Sweeps stop once the
    off-diagonal Frobenius mass is below ``tol * ||M||_F`` for every matrix in
    the stack.
    """
    a = np.array(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {a.shape}")
    n = a.shape[-1]
    batch_shape = a.shape[:-2]
    a = a.reshape(-1, n, n)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    fro = np.sqrt(np.einsum("kij,kij->k", a, a))
    offmask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[:, offmask] ** 2, axis=1))
        if np.all(off <= tol * fro):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                active = apq != 0.0
                if not active.any():
                    continue
                safe = np.where(active, apq, 1.0)
                with np.errstate(over="ignore"):
                    theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
                sgn = np.where(theta >= 0.0, 1.0, -1.0)
                t = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                cp, sp = c[:, None], s[:, None]
                colp, colq = a[:, :, p].copy(), a[:, :, q].copy()
                a[:, :, p] = cp * colp - sp * colq
                a[:, :, q] = sp * colp + cp * colq
                rowp, rowq = a[:, p, :].copy(), a[:, q, :].copy()
                a[:, p, :] = cp * rowp - sp * rowq
                a[:, q, :] = sp * rowp + cp * rowq
                a[:, p, q] = np.where(active, 0.0, a[:, p, q])
                a[:, q, p] = a[:, p, q]

                vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
                v[:, :, p] = cp * vp - sp * vq
                v[:, :, q] = sp * vp + cp * vq

    w = np.diagonal(a, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w.reshape(batch_shape + (n,)), v.reshape(batch_shape + (n, n))


class SymMatrix:
    """Immutable dense symmetric n x n matrix with a lazily cached spectrum."""

    __slots__ = ("_array", "_spectrum")

    def __init__(self, matrix, *, atol: float = 1e-12):
        arr = np.array(matrix, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise DimensionError("matrix dimension must be at least 2")
        scale = 1.0 + np.max(np.abs(arr))
        if np.max(np.abs(arr - arr.T)) > atol * scale:
            raise ValueError("matrix is not symmetric")
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        self._array = arr
        self._spectrum = None

    @classmethod
    def from_upper(cls, n: int, entries) -> "SymMatrix":
        """Build from the n(n+1)/2 upper-triangle entries in row-major order."""
        entries = np.asarray(entries, dtype=float)
        if entries.shape != (n * (n + 1) // 2,):
            raise DimensionError(f"need {n * (n + 1) // 2} entries for n={n}")
        arr = np.zeros((n, n))
        arr[np.triu_indices(n)] = entries
        return cls(arr + np.triu(arr, 1).T)

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "SymMatrix":
        return cls(scale * np.eye(n))

    @classmethod
    def diag(cls, values) -> "SymMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def n(self) -> int:
        return self._array.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def upper(self) -> np.ndarray:
        return self._array[np.triu_indices(self.n)].copy()

    def eigh(self):
        """(eigenvalues ascending, orthonormal eigenvector matrix), cached."""
        if self._spectrum is None:
            w, v = jacobi_eigh(self._array)
            w.setflags(write=False)
            v.setflags(write=False)
            self._spectrum = (w, v)
        return self._spectrum

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh()[0]

    def __array__(self, dtype=None, copy=None):
        return self._array if dtype is None else self._array.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return np.array_equal(self._array, other._array)

    def __hash__(self):
        return hash(self._array.tobytes())

    def __repr__(self):
        return f"SymMatrix({self._array.tolist()!r})"


@dataclass(frozen=True)
class DomainReport:
    admissible: bool
    margin: float
    violated_constraint: str | None = None

    def to_dict(self):
        margin = self.margin if math.isfinite(self.margin) else None
        return {
            "admissible": self.admissible,
            "margin": margin,
            "violated_constraint": self.violated_constraint,
        }


def _as_stack(M):
    """Return (array of shape (..., n, n), is_single)."""
    arr = M.array if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {arr.shape}")
    if arr.shape[-1] < 2:
        raise DimensionError("matrix dimension must be at least 2")
    return arr, arr.ndim == 2


def _spectrum(M):
    if isinstance(M, SymMatrix):
        return M.eigh()
    return jacobi_eigh(M)


def lower_bound(tau: TauParams) -> float:
    """Open lower bound on eigenvalues for the branch (-inf when unconstrained)."""
    br = tau.branch
    if br is Branch.MONGE_AMPERE:
        return 0.0
    if br is Branch.SMALL_TAU:
        return -tau.a + tau.b
    if br is Branch.INVERSE:
        return -1.0
    if br is Branch.LARGE_TAU:
        return -tau.a - tau.b
    return -math.inf


_CONSTRAINT_TEXT = {
    Branch.MONGE_AMPERE: "D^2u > 0",
    Branch.SMALL_TAU: "D^2u > (-a+b)I",
    Branch.INVERSE: "D^2u > -I",
    Branch.LARGE_TAU: "D^2u > (-a-b)I (toolkit convention keeping lambda+a+b > 0)",
}


def branch_phi(tau: TauParams, lam, n: int):
    """Scalar branch function; F_tau(lambda) is the sum of it over eigenvalues."""
    lam = np.asarray(lam, dtype=float)
    br = tau.branch
    if br is Branch.MONGE_AMPERE:
        return np.log(lam) / n
    if br is Branch.SMALL_TAU:
        return tau.prefactor * np.log1p(-2.0 * tau.b / (lam + tau.a + tau.b))
    if br is Branch.INVERSE:
        return -SQRT2 / (1.0 + lam)
    if br is Branch.LARGE_TAU:
        return tau.prefactor * np.arctan((lam + tau.a - tau.b) / (lam + tau.a + tau.b))
    return np.arctan(lam)


def branch_dphi(tau: TauParams, lam, n: int):
    lam = np.asarray(lam, dtype=float)
    br = tau.branch
    if br is Branch.MONGE_AMPERE:
        return 1.0 / (n * lam)
    if br is Branch.SMALL_TAU:
        a, b = tau.a, tau.b
        return math.sqrt(a * a + 1.0) / ((lam + a - b) * (lam + a + b))
    if br is Branch.INVERSE:
        return SQRT2 / (1.0 + lam) ** 2
    if br is Branch.LARGE_TAU:
        a, b = tau.a, tau.b
        return 2.0 * math.sqrt(a * a + 1.0) / ((lam + a + b) ** 2 + (lam + a - b) ** 2)
    return 1.0 / (1.0 + lam * lam)


def phi_increment(tau: TauParams, base, delta, n: int):
    """phi(base + delta) - phi(base) without cancellation for small delta."""
    base = np.asarray(base, dtype=float)
    delta = np.asarray(delta, dtype=float)
    br = tau.branch
    if br is Branch.MONGE_AMPERE:
        return np.log1p(delta / base) / n
    if br is Branch.SMALL_TAU:
        a, b = tau.a, tau.b
        return tau.prefactor * (
            np.log1p(delta / (base + a - b)) - np.log1p(delta / (base + a + b))
        )
    if br is Branch.INVERSE:
        return SQRT2 * delta / ((1.0 + base) * (1.0 + base + delta))
    if br is Branch.LARGE_TAU:
        a, b = tau.a, tau.b
        lo, hi = base + a + b, base + delta + a + b
        g0 = (base + a - b) / lo
        g1 = (base + delta + a - b) / hi
        diff = 2.0 * b * delta / (lo * hi)
        return tau.prefactor * np.arctan2(diff, 1.0 + g0 * g1)
    return np.arctan2(delta, 1.0 + base * (base + delta))


def _margins(tau, w):
    bound = lower_bound(tau)
    return w[..., 0] - bound


def _require_admissible(tau, w):
    margin = _margins(tau, w)
    bad = ~(margin > 0)
    if np.any(bad):
        worst = float(np.min(margin))
        report = DomainReport(False, worst, _CONSTRAINT_TEXT.get(tau.branch))
        raise DomainError(
            f"matrix outside the {tau.branch.value} domain "
            f"({report.violated_constraint}); margin {worst:.3g}",
            report,
        )


def check_domain(tau: TauParams, M) -> DomainReport:
    arr, single = _as_stack(M)
    if not single:
        raise DimensionError("check_domain takes a single matrix")
    w, _ = _spectrum(M)
    margin = float(_margins(tau, w))
    ok = margin > 0
    return DomainReport(ok, margin, None if ok else _CONSTRAINT_TEXT.get(tau.branch))


def eval_F(tau: TauParams, M):
    """F_tau(lambda(M)) for a single matrix (float) or a stack (array)."""
    arr, single = _as_stack(M)
    n = arr.shape[-1]
    w, _ = _spectrum(M)
    _require_admissible(tau, w)
    val = np.sum(branch_phi(tau, w, n), axis=-1)
    return float(val) if single else val


def eval_DF(tau: TauParams, M):
    """Matrix derivative of F_tau(lambda(M)) with respect to the entries of M."""
    arr, single = _as_stack(M)
    n = arr.shape[-1]
    w, v = _spectrum(M)
    _require_admissible(tau, w)
    d = branch_dphi(tau, w, n)
    out = np.einsum("...ik,...k,...jk->...ij", v, d, v)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return SymMatrix(out) if single else out


def spd_power(M, power: float):
    arr, single = _as_stack(M)
    w, v = _spectrum(M)
    if np.any(~(w[..., 0] > 0)):
        raise NotSPDError(f"matrix is not positive definite (lambda_min = {np.min(w[..., 0]):.3g})")
    out = np.einsum("...ik,...k,...jk->...ij", v, w**power, v)
    out = 0.5 * (out + np.swapaxes(out, -1, -2))
    return SymMatrix(out) if single else out


def spd_inv_sqrt(M):
    """N symmetric positive definite with N @ N = M^{-1}."""
    return spd_power(M, -0.5)


_GL8 = np.polynomial.legendre.leggauss(8)


def mean_derivative(tau: TauParams, A, H, nodes: int = 8):
    """Average of DF_tau over the segment A + tH, t in [0, 1].

    ``H`` may be a stack; the result has the same shape.  Gauss-Legendre in
    ``t`` with a fixed node count keeps the result reproducible.
    """
    A = np.asarray(A.array if isinstance(A, SymMatrix) else A, dtype=float)
    H = np.asarray(H.array if isinstance(H, SymMatrix) else H, dtype=float)
    t, wt = _GL8 if nodes == 8 else np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    total = np.zeros(np.broadcast_shapes(A.shape, H.shape))
    for ti, wi in zip(t, wt):
        total += wi * np.asarray(eval_DF(tau, A + ti * H))
    return total


def eval_F_increment(tau: TauParams, A, H, nodes: int = 8):
    """F(A + H) - F(A) through the mean-value identity, free of cancellation."""
    abar = mean_derivative(tau, A, H, nodes)
    H = np.asarray(H.array if isinstance(H, SymMatrix) else H, dtype=float)
    return np.einsum("...ij,...ij->...", abar, H)
