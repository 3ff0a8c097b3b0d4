"""Discrete Legendre transforms and the two Legendre reductions.

For 0 < tau < pi/4 the shifted function u_bar = u + (a+b)/2 |x|^2 is uniformly
convex; with x_t = D u_bar(x) and v its Legendre dual, the function
v_bar = |x_t|^2/2 - 2b v solves det D^2 v_bar = exp(2b f(x)/sqrt(a^2+1)).
For tau = pi/4 the shift is |x|^2/2 and the dual solves the Poisson equation
Delta v = -(sqrt 2/2) f(x).

Samples are scattered point sets with values, gradients and (optionally)
Hessians.  The dual gradient at a dual node is the forward node itself; off
the nodes it is looked up from the nearest dual node with a first-order
Hessian correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import CollisionError, DomainError, NotConvexError
from .fields import ScalarField
from .operator_core import Branch, TauParams, jacobi_eigh

COLLISION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ConvexSample:
    """Scattered samples of a uniformly convex function.

    ``shift`` records the multiple s of |x|^2/2 that was added to the
    original function, so reductions can check they got the right one.
    """

    dim: int
    points: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    hessians: Optional[np.ndarray]
    convexity_margin: float
    shift: float = 0.0

    def __len__(self):
        return len(self.values)


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def _discrete_margin(points, gradients):
    """min over nearby pairs of (g_i - g_j).(x_i - x_j) / |x_i - x_j|^2."""
    tree = cKDTree(points)
    d, idx = tree.query(points, k=min(len(points), points.shape[1] + 2))
    i = np.repeat(np.arange(len(points)), idx.shape[1] - 1)
    j = idx[:, 1:].ravel()
    dx = points[i] - points[j]
    dg = gradients[i] - gradients[j]
    return float(np.min(np.sum(dx * dg, axis=1) / np.sum(dx * dx, axis=1)))


def make_sample(points, values, gradients, hessians=None, shift: float = 0.0) -> ConvexSample:
    """Assemble a sample; the convexity margin is min lambda_min of the
    Hessians, or a discrete monotonicity estimate when none are given."""
    points = np.array(points, dtype=float)
    values = np.array(values, dtype=float)
    gradients = np.array(gradients, dtype=float)
    hessians = None if hessians is None else np.array(hessians, dtype=float)
    if hessians is not None:
        margin = float(np.min(np.linalg.eigvalsh(hessians)[..., 0]))
    else:
        margin = _discrete_margin(points, gradients)
    _freeze(points, values, gradients, hessians)
    return ConvexSample(points.shape[1], points, values, gradients, hessians, margin, shift)


def sample_field(u: ScalarField, points, shift: float = 0.0, hessians: bool = True) -> ConvexSample:
    """Sample u_bar = u + shift |x|^2 / 2 with the field's analytic derivatives."""
    x = np.asarray(points, dtype=float)
    if u.grad is None:
        raise ValueError("field needs an analytic gradient")
    vals = u.eval(x) + 0.5 * shift * np.sum(x * x, axis=-1)
    grads = u.grad(x) + shift * x
    hess = None
    if hessians:
        if u.hess is None:
            raise ValueError("field has no analytic Hessian")
        hess = u.hess(x) + shift * np.eye(x.shape[-1])
    return make_sample(x, vals, grads, hess, shift)


def reduction_shift(tau: TauParams) -> float:
    """Shift that makes u_bar uniformly convex for the branch's reduction."""
    if tau.branch is Branch.SMALL_TAU:
        return tau.a + tau.b
    if tau.branch is Branch.INVERSE:
        return 1.0
    raise ValueError(f"no Legendre reduction for branch {tau.branch.name}")


def shifted_sample(u: ScalarField, points, tau: TauParams, hessians: bool = True) -> ConvexSample:
    return sample_field(u, points, reduction_shift(tau), hessians)


def cube_grid(n: int, lo: float, hi: float, h: float) -> np.ndarray:
    """Uniform tensor grid with spacing close to h covering [lo, hi]^n."""
    count = int(round((hi - lo) / h)) + 1
    axis = np.linspace(lo, hi, count)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class LegendrePair:
    forward: ConvexSample
    dual: ConvexSample
    tau: Optional[TauParams] = None

    def _tree(self):
        tree = self.__dict__.get("_kd")
        if tree is None:
            tree = cKDTree(self.dual.points)
            object.__setattr__(self, "_kd", tree)
        return tree

    def dual_gradient(self, xt) -> np.ndarray:
        """Dv at arbitrary dual points: nearest-node inverse lookup with a
        Hessian correction when Hessians are available."""
        xt = np.asarray(xt, dtype=float)
        _, j = self._tree().query(xt)
        out = self.dual.gradients[j]
        if self.dual.hessians is not None:
            step = xt - self.dual.points[j]
            out = out + np.einsum("...ij,...j->...i", self.dual.hessians[j], step)
        return out

    def dual_value(self, xt) -> np.ndarray:
        xt = np.asarray(xt, dtype=float)
        _, j = self._tree().query(xt)
        step = xt - self.dual.points[j]
        val = self.dual.values[j] + np.sum(self.dual.gradients[j] * step, axis=-1)
        if self.dual.hessians is not None:
            val = val + 0.5 * np.einsum("...i,...ij,...j->...", step, self.dual.hessians[j], step)
        return val

    def hessian_product_error(self) -> Optional[float]:
        """max |D^2 v(x_t) D^2 u_bar(x) - I| over nodes."""
        if self.forward.hessians is None:
            return None
        prod = self.dual.hessians @ self.forward.hessians
        return float(np.abs(prod - np.eye(self.forward.dim)).max())

    def growth_ratio(self):
        """Measured (min, max) of |x_t| / |x| over nodes away from the origin."""
        rx = np.linalg.norm(self.forward.points, axis=1)
        rt = np.linalg.norm(self.dual.points, axis=1)
        keep = rx > 1e-12
        ratio = rt[keep] / rx[keep]
        return float(ratio.min()), float(ratio.max())


def legendre_dual(sample: ConvexSample, tau: Optional[TauParams] = None) -> LegendrePair:
    """Dual nodes x_t = D u_bar(x), values x.x_t - u_bar, gradients x and
    Hessians (D^2 u_bar)^-1."""
    if not sample.convexity_margin > 0:
        raise NotConvexError(f"convexity margin {sample.convexity_margin:.3e} is not positive")
    pairs = cKDTree(sample.gradients).query_pairs(COLLISION_TOL)
    if pairs:
        i, j = min(pairs)
        raise CollisionError(f"nodes {i} and {j} share a gradient within {COLLISION_TOL}")
    xt = np.array(sample.gradients)
    vals = np.sum(sample.points * xt, axis=1) - sample.values
    grads = np.array(sample.points)
    hess = None
    margin = None
    if sample.hessians is not None:
        w, V = jacobi_eigh(sample.hessians)
        hess = np.einsum("...ik,...k,...jk->...ij", V, 1.0 / w, V)
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        margin = float(np.min(1.0 / w[..., -1]))
    if margin is None:
        margin = _discrete_margin(xt, grads)
    _freeze(xt, vals, grads, hess)
    dual = ConvexSample(sample.dim, xt, vals, grads, hess, margin, 0.0)
    return LegendrePair(sample, dual, tau)


def eigen_map_forms(tau: TauParams, lam):
    """Both algebraic forms 1 - 2b/(lam+a+b) and (lam+a-b)/(lam+a+b)."""
    if tau.branch is not Branch.SMALL_TAU:
        raise DomainError("the eigenvalue map is defined for 0 < tau < pi/4 only")
    lam = np.asarray(lam, dtype=float)
    a, b = tau.a, tau.b
    if np.any(~(lam > -a + b)):
        raise DomainError(f"eigenvalues must exceed -a+b = {-a + b:.6g}")
    return 1.0 - 2.0 * b / (lam + a + b), (lam + a - b) / (lam + a + b)


def eigen_map_check(tau: TauParams, lam) -> np.ndarray:
    """Mapped eigenvalues 1 - 2b/(lam+a+b), each in (0, 1)."""
    return eigen_map_forms(tau, lam)[0]


@dataclass(frozen=True, eq=False)
class Reduction:
    """Right-hand side g at the dual nodes, the left-hand side built from
    analytic Hessians (None without them) and the worst residual."""

    g: np.ndarray
    lhs: Optional[np.ndarray]
    residual: Optional[float]
    field: ScalarField
    delta: Optional[float] = None
    relative: bool = True

    def to_dict(self):
        return {"residual": self.residual, "delta": self.delta, "relative": self.relative,
                "nodes": int(len(self.g))}


def _check_pair(pair, tau, branch):
    if tau.branch is not branch:
        raise ValueError(f"reduction needs branch {branch.name}, got {tau.branch.name}")
    want = reduction_shift(tau)
    if not math.isclose(pair.forward.shift, want, rel_tol=1e-12, abs_tol=1e-14):
        raise ValueError(f"pair was built with shift {pair.forward.shift}, reduction needs {want}")


def reduce_small_tau(pair: LegendrePair, f: ScalarField, tau: Optional[TauParams] = None) -> Reduction:
    """Monge-Ampere reduction: det D^2 v_bar = exp(2b f(x)/sqrt(a^2+1)).

    The node x is recovered as (x_t - D v_bar(x_t)) / (2b) = D v(x_t).
    """
    tau = tau or pair.tau
    _check_pair(pair, tau, Branch.SMALL_TAU)
    b, scale = tau.b, 2.0 * tau.b / math.sqrt(tau.a**2 + 1)
    xt = pair.dual.points
    dvbar = xt - 2.0 * b * pair.dual.gradients
    x = (xt - dvbar) / (2.0 * b)
    g = np.exp(scale * f.eval(x))
    lhs = resid = None
    if pair.dual.hessians is not None:
        n = pair.forward.dim
        lhs = np.linalg.det(np.eye(n) - 2.0 * b * pair.dual.hessians)
        resid = float(np.max(np.abs(lhs - g) / g))

    def g_at(y):
        return np.exp(scale * f.eval(pair.dual_gradient(y)))

    return Reduction(g, lhs, resid, ScalarField(pair.forward.dim, g_at), pair.forward.convexity_margin)


def reduce_inverse_tau(pair: LegendrePair, f: ScalarField, tau: Optional[TauParams] = None) -> Reduction:
    """Poisson reduction at tau = pi/4: Delta v = -(sqrt 2 / 2) f(D v)."""
    tau = tau or pair.tau
    _check_pair(pair, tau, Branch.INVERSE)
    delta = pair.forward.convexity_margin
    if not delta > 0:
        raise DomainError(f"D^2 u_bar is not uniformly positive (delta = {delta:.3e})")
    c = -math.sqrt(2.0) / 2
    g = c * f.eval(pair.dual.gradients)
    lhs = resid = None
    relative = True
    if pair.dual.hessians is not None:
        lhs = np.trace(pair.dual.hessians, axis1=-2, axis2=-1)
        err = np.abs(lhs - g)
        scale = np.abs(g)
        relative = bool(np.all(scale > 0))
        resid = float(np.max(err / scale)) if relative else float(np.max(err))

    def g_at(y):
        return c * f.eval(pair.dual_gradient(y))

    return Reduction(g, lhs, resid, ScalarField(pair.forward.dim, g_at), delta, relative)
