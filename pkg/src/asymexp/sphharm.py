"""Real spherical harmonics on S^(n-1), product quadrature and projection.

Points on the sphere are stored as unit vectors.  The quadrature peels one
coordinate at a time: x = (sqrt(1-t^2) w, t) with w on the next lower sphere,
so the last coordinate is the polar one and the measure on t carries the
Jacobi weight (1-t^2)^((m-3)/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import NodeMismatch, UnsupportedDegree, UnsupportedDimension

SUPPORTED_DIMS = (3, 4, 5)
MAX_QUAD_DEGREE = 40
MAX_HARMONIC_DEGREE = 8


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^(n-1) in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def harmonic_dimension(n: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics in n variables."""
    if k < 0:
        return 0
    lower = math.comb(n + k - 3, k - 2) if k >= 2 else 0
    return math.comb(n + k - 1, k) - lower


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    n: int
    degree: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.asarray(values) @ self.weights)

    def __len__(self):
        return len(self.weights)


def _circle(D):
    count = 2 * (D // 2 + 1)
    phi = 2.0 * math.pi * np.arange(count) / count
    nodes = np.column_stack([np.cos(phi), np.sin(phi)])
    return nodes, np.full(count, 2.0 * math.pi / count)


def _polar_rule(m, D):
    """Gauss rule in t = polar coordinate for S^(m-1), weight (1-t^2)^((m-3)/2)."""
    count = D // 2 + 1
    alpha = (m - 3) / 2
    if alpha == 0:
        return np.polynomial.legendre.leggauss(count)
    t, w = special.roots_jacobi(count, alpha, alpha)
    return t, w


def build_quadrature(n: int, degree: int) -> SphereQuadrature:
    """Product rule on S^(n-1) exact for polynomials of total degree <= ``degree``."""
    if n not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"sphere quadrature supports n in {SUPPORTED_DIMS}, got {n}")
    if not 0 <= degree <= MAX_QUAD_DEGREE:
        raise ValueError(f"quadrature degree must lie in [0, {MAX_QUAD_DEGREE}]")
    nodes, weights = _circle(degree)
    for m in range(3, n + 1):
        t, wt = _polar_rule(m, degree)
        s = np.sqrt(1.0 - t * t)
        nodes = np.concatenate(
            [np.column_stack([si * nodes, np.full(len(nodes), ti)]) for ti, si in zip(t, s)]
        )
        weights = np.concatenate([wi * weights for wi in wt])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereQuadrature(n, degree, nodes, weights)


@dataclass(frozen=True, eq=False)
class HarmonicBasis:
    """Orthonormal real harmonics of one degree, evaluated on unit vectors.

    ``complete`` is False for zonal-only bases, which span a single direction
    of the degree-k space.
    """

    n: int
    k: int
    size: int
    complete: bool
    labels: tuple
    _evaluate: Callable = field(repr=False)
    axis: np.ndarray | None = None

    @property
    def eigenvalue(self) -> int:
        return self.k * (self.k + self.n - 2)

    def __call__(self, theta) -> np.ndarray:
        """Basis values, shape (..., size), at unit vectors ``theta``."""
        theta = np.asarray(theta, dtype=float)
        return self._evaluate(theta)

    @property
    def functions(self):
        return [lambda th, i=i: self(th)[..., i] for i in range(self.size)]


def _full_basis_s2(k):
    norms = [math.sqrt((2 * k + 1) / (4 * math.pi) * math.factorial(k - m) / math.factorial(k + m))
             for m in range(k + 1)]
    labels = ["m=0"]
    for m in range(1, k + 1):
        labels += [f"m={m},cos", f"m={m},sin"]

    def evaluate(x):
        t = np.clip(x[..., 2], -1.0, 1.0)
        phi = np.arctan2(x[..., 1], x[..., 0])
        cols = [norms[0] * special.eval_legendre(k, t)]
        for m in range(1, k + 1):
            # (-1)^m removes the Condon-Shortley phase so Y_{1,1,cos} ~ +x_1
            plm = (-1) ** m * special.lpmv(m, k, t)
            amp = math.sqrt(2.0) * norms[m] * plm
            cols += [amp * np.cos(m * phi), amp * np.sin(m * phi)]
        return np.stack(cols, axis=-1)

    return evaluate, tuple(labels)


def _linear_basis(n):
    scale = math.sqrt(n / sphere_area(n))

    def evaluate(x):
        return scale * x

    return evaluate, tuple(f"x{i + 1}" for i in range(n))


def _constant_basis(n):
    c = 1.0 / math.sqrt(sphere_area(n))

    def evaluate(x):
        return np.full(x.shape[:-1] + (1,), c)

    return evaluate, ("const",)


def build_zonal_basis(n: int, k: int, axis=None) -> HarmonicBasis:
    """Single normalized Gegenbauer harmonic C_k^((n-2)/2)(axis . x)."""
    if n not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"harmonics support n in {SUPPORTED_DIMS}, got {n}")
    if not 0 <= k <= MAX_HARMONIC_DEGREE:
        raise UnsupportedDegree(f"zonal harmonics support k <= {MAX_HARMONIC_DEGREE}")
    axis = np.zeros(n) if axis is None else np.asarray(axis, dtype=float)
    if not axis.any():
        axis[-1] = 1.0
    axis = axis / np.linalg.norm(axis)
    lam = (n - 2) / 2
    h = (math.pi * 2 ** (1 - 2 * lam) * math.gamma(k + 2 * lam)
         / (math.factorial(k) * (k + lam) * math.gamma(lam) ** 2))
    norm = math.sqrt(sphere_area(n - 1) * h)

    def evaluate(x):
        t = np.clip(x @ axis, -1.0, 1.0)
        return (special.eval_gegenbauer(k, lam, t) / norm)[..., None]

    axis.setflags(write=False)
    complete = harmonic_dimension(n, k) == 1
    return HarmonicBasis(n, k, 1, complete, ("zonal",), evaluate, axis)


def build_basis(n: int, k: int, axis=None) -> HarmonicBasis:
    """Orthonormal degree-k basis on S^(n-1).

    n = 3: full basis for k <= 8, ordered zonal, then cos/sin pairs by order.
    n = 4, 5: full basis for k <= 1; zonal-only about ``axis`` for 2 <= k <= 8.
    """
    if n not in SUPPORTED_DIMS:
        raise UnsupportedDimension(f"harmonics support n in {SUPPORTED_DIMS}, got {n}")
    if not 0 <= k <= MAX_HARMONIC_DEGREE:
        raise UnsupportedDegree(f"degree {k} outside [0, {MAX_HARMONIC_DEGREE}]")
    if k == 0:
        ev, labels = _constant_basis(n)
    elif n == 3:
        ev, labels = _full_basis_s2(k)
    elif k == 1:
        ev, labels = _linear_basis(n)
    else:
        return build_zonal_basis(n, k, axis)
    return HarmonicBasis(n, k, len(labels), True, labels, ev)


def project(values, basis: HarmonicBasis, quad: SphereQuadrature, nodes=None) -> np.ndarray:
    """Coefficients <field, Y_m> for each basis function, by quadrature.

    ``values`` must be sampled at ``quad.nodes``; pass ``nodes`` to have that
    checked.  A leading batch axis on ``values`` is allowed (shape (B, N)).
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != len(quad.weights):
        raise NodeMismatch(
            f"field has {values.shape[-1]} samples, quadrature has {len(quad.weights)} nodes"
        )
    if nodes is not None:
        nodes = np.asarray(nodes)
        if nodes.shape != quad.nodes.shape or not np.array_equal(nodes, quad.nodes):
            raise NodeMismatch("field was not sampled on the quadrature nodes")
    if basis.n != quad.n:
        raise NodeMismatch("basis and quadrature dimensions differ")
    if quad.degree < 2 * basis.k + 4:
        raise ValueError(
            f"quadrature degree {quad.degree} too low for degree-{basis.k} projection "
            f"(need >= {2 * basis.k + 4})"
        )
    Y = basis(quad.nodes)
    return (values * quad.weights) @ Y


def reconstruct(coeffs, basis: HarmonicBasis, theta) -> np.ndarray:
    """Evaluate sum_m coeffs[m] Y_m at unit vectors ``theta``."""
    return basis(theta) @ np.asarray(coeffs, dtype=float)
