"""Newtonian potential of decaying data in R^3 and the Poisson decay checks.

w(x) = -(1/(4 pi)) int_{|y| <= R} f(y) / |x - y| dy is split into three
regions around the evaluation point x (|x| = X, split fraction s):

* E1: origin-centred spheres with radius rho <= sX,
* E2: the ball |y - x| <= sX, in polar coordinates about x (the rho^2
  Jacobian cancels the kernel, so no singular quadrature is needed),
* E3: origin-centred spheres with sX < rho <= R minus the E2 ball; for
  rho in [(1 - s)X, (1 + s)X] the polar angle range about x is cut off.

Every sphere uses a Gauss rule in cos(gamma) about x and a uniform rule in
the azimuth; radial panels are Gauss-Legendre with geometric growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .decay import DecayReport, DecaySpec, fit_decay
from .errors import TailError, UnsupportedDimension
from .fields import DecayMeta, ScalarField
from .sampling import fd_laplacian

__all__ = [
    "DecayReport",
    "DecaySpec",
    "PoissonCheck",
    "PotentialResult",
    "QuadSpec",
    "check_radial_identity",
    "decaying_bump",
    "fit_decay",
    "measure_decay",
    "newtonian_potential",
    "radial_identity_constant",
    "radial_reference_potential",
    "uniform_ball",
    "verify_poisson",
]


@dataclass(frozen=True)
class QuadSpec:
    """Resolution of the shell quadrature."""

    radial_nodes: int = 16
    polar_nodes: int = 32
    azimuth_nodes: int = 16
    ball_panels: int = 4
    panel_ratio: float = 2.0

    def refined(self, factor: int = 4) -> "QuadSpec":
        return replace(
            self,
            radial_nodes=self.radial_nodes * factor,
            polar_nodes=self.polar_nodes * factor,
            azimuth_nodes=self.azimuth_nodes * factor,
        )


@dataclass(frozen=True)
class PotentialResult:
    value: float
    tail_bound: float
    regions: dict

    def __float__(self):
        return self.value


# ---------------------------------------------------------------- fields


def decaying_bump(zeta: float, n: int = 3, amplitude: float = 1.0) -> ScalarField:
    """f(y) = amplitude (1 + |y|^2)^(-zeta/2); |f| <= 2^(zeta/2) |amplitude| (1+|y|)^(-zeta)."""

    def ev(y):
        return amplitude * (1.0 + np.sum(y * y, axis=-1)) ** (-zeta / 2)

    meta = DecayMeta(0.0, zeta, bound_constant=abs(amplitude) * 2 ** (zeta / 2))
    return ScalarField(n, ev, decay_meta=meta, deviation=ev)


def uniform_ball(radius: float = 1.0, value: float = 1.0, n: int = 3) -> ScalarField:
    """Indicator of the closed ball of given radius, scaled by ``value``."""

    def ev(y):
        return np.where(np.sum(y * y, axis=-1) <= radius * radius, value, 0.0)

    meta = DecayMeta(0.0, math.inf, bound_constant=abs(value), support_radius=radius)
    return ScalarField(n, ev, decay_meta=meta, deviation=ev, radial_breaks=(radius,))


# ----------------------------------------------------------- quadrature


def _frame(x):
    """Orthonormal rows (e0, e1, e2) with e0 along x (or e_3 at the origin)."""
    X = np.linalg.norm(x)
    e0 = x / X if X > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.eye(3)[np.argmin(np.abs(e0))]
    e1 = helper - (helper @ e0) * e0
    e1 /= np.linalg.norm(e1)
    return np.stack([e0, e1, np.cross(e0, e1)])


def _directions(frame, t_hi, spec):
    """Unit vectors and weights for the spherical cap cos(gamma) <= t_hi."""
    t, wt = np.polynomial.legendre.leggauss(spec.polar_nodes)
    t = -1.0 + (t + 1.0) * (t_hi + 1.0) / 2
    wt = wt * (t_hi + 1.0) / 2
    m = spec.azimuth_nodes
    psi = 2.0 * math.pi * np.arange(m) / m
    st = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
    local = np.stack(
        [
            np.repeat(t, m),
            np.outer(st, np.cos(psi)).ravel(),
            np.outer(st, np.sin(psi)).ravel(),
        ],
        axis=-1,
    )
    return local @ frame, np.repeat(wt, m) * (2.0 * math.pi / m)


def _gauss(a, b, count):
    t, w = np.polynomial.legendre.leggauss(count)
    return a + (t + 1.0) * (b - a) / 2, w * (b - a) / 2


def _geometric_breaks(lo, hi, ratio, seed=1.0):
    """Panel ends between lo and hi, growing geometrically from max(lo, seed)."""
    pts = [lo]
    r = max(lo, seed) if lo > 0 else seed
    while r < hi:
        if r > lo:
            pts.append(r)
        r *= ratio
    pts.append(hi)
    return pts


def _with_breaks(pts, extra):
    lo, hi = pts[0], pts[-1]
    merged = sorted(set(pts) | {b for b in extra if lo < b < hi})
    return merged


def _origin_shells(f, x, frame, panels, spec, X, split):
    """Sum over origin-centred shells, cut to exclude |y - x| < split X."""
    total = 0.0
    for a, b in zip(panels[:-1], panels[1:]):
        rho, wr = _gauss(a, b, spec.radial_nodes)
        for r, w in zip(rho, wr):
            if X > 0 and (1 - split) * X < r < (1 + split) * X:
                t_hi = min(1.0, (r * r + X * X * (1 - split * split)) / (2 * r * X))
            else:
                t_hi = 1.0
            dirs, wd = _directions(frame, t_hi, spec)
            y = r * dirs
            kern = 1.0 / np.linalg.norm(y - x, axis=-1)
            total += w * r * r * float((f.eval(y) * kern) @ wd)
    return total


def _ball_about_x(f, x, frame, radius, spec):
    """Integral of f(y)/|x - y| over |y - x| <= radius in polar coordinates about x."""
    total = 0.0
    dirs, wd = _directions(frame, 1.0, spec)
    edges = np.linspace(0.0, radius, spec.ball_panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        s, ws = _gauss(a, b, spec.radial_nodes)
        for si, wi in zip(s, ws):
            total += wi * si * float(f.eval(x + si * dirs) @ wd)
    return total


def tail_bound(f: ScalarField, R: float) -> float:
    """Bound on |contribution of |y| > R| for |x| <= R/4."""
    meta = f.decay_meta
    if meta is None:
        return math.inf
    if meta.support_radius is not None and meta.support_radius <= R:
        return 0.0
    if meta.bound_constant is None or not meta.zeta_nominal > 2:
        return math.inf
    zeta = meta.zeta_nominal
    return (4.0 / 3.0) * meta.bound_constant * R ** (2 - zeta) / (zeta - 2)


def newtonian_potential(f: ScalarField, x, truncation_R: float, quad_spec: QuadSpec | None = None,
                        tail_tol: float | None = None, split: float = 0.5) -> PotentialResult:
    """Truncated Newtonian potential -(1/4pi) int_{|y|<=R} f(y)/|x-y| dy.

    The tail beyond R is not added; its analytic bound is reported in the
    result (and checked against ``tail_tol`` when given).  For radial f the
    tail is exactly constant in x, so it only shifts w by a constant.
    """
    if f.dim != 3:
        raise UnsupportedDimension("the Newtonian potential is implemented for n = 3 only")
    if not 0 < split <= 0.5:
        raise ValueError("split fraction must lie in (0, 1/2]")
    spec = quad_spec or QuadSpec()
    x = np.asarray(x, dtype=float)
    X = float(np.linalg.norm(x))
    R = float(truncation_R)
    if R < 4 * X * (1 - 1e-12) or R <= 0:
        raise ValueError("truncation radius must be at least 4|x|")
    tb = tail_bound(f, R)
    if tail_tol is not None and tb > tail_tol:
        raise TailError(f"tail bound {tb:.3e} exceeds tolerance {tail_tol:.3e}")

    frame = _frame(x)
    breaks = tuple(f.radial_breaks)
    outer = R
    if f.decay_meta is not None and f.decay_meta.support_radius is not None:
        outer = min(R, f.decay_meta.support_radius)
    ratio = spec.panel_ratio

    if X == 0:
        e1 = _origin_shells(f, x, frame, _with_breaks(_geometric_breaks(0.0, outer, ratio), breaks),
                            spec, X, split)
        regions = {"E1": e1, "E2": 0.0, "E3": 0.0}
    else:
        inner = min(split * X, outer)
        e1 = _origin_shells(f, x, frame, _with_breaks(_geometric_breaks(0.0, inner, ratio), breaks),
                            spec, X, split)
        e2 = _ball_about_x(f, x, frame, split * X, spec)
        e3 = 0.0
        if outer > split * X:
            pts = [split * X, (1 - split) * X, X, (1 + split) * X]
            pts = sorted({p for p in pts if p < outer} | {outer})
            far = pts[-1]
            if far > (1 + split) * X:
                pts = pts[:-1] + _geometric_breaks((1 + split) * X, far, ratio, seed=(1 + split) * X)
            pts = [p for i, p in enumerate(pts) if i == 0 or p > pts[i - 1]]
            e3 = _origin_shells(f, x, frame, _with_breaks(pts, breaks), spec, X, split)
        regions = {"E1": e1, "E2": e2, "E3": e3}
    scale = -1.0 / (4.0 * math.pi)
    regions = {k: scale * v for k, v in regions.items()}
    value = regions["E1"] + regions["E2"] + regions["E3"]
    return PotentialResult(float(value), tb, regions)


# --------------------------------------------------------------- oracles


def radial_reference_potential(profile, r: float, R: float = math.inf, breaks=()) -> float:
    """Shell-theorem value of the truncated potential for radial f = profile(|y|).

    w(r) = -[(1/r) int_0^r f rho^2 drho + int_r^R f rho drho].
    """
    def quad(fn, a, b):
        # geometric panels keep each quad call on a well-scaled interval
        edges = [a] + [p for p in breaks if a < p < b]
        edge = max(a, 1.0) * 2.0
        while edge < b and edge < 1e6 * max(a, 1.0):
            edges.append(edge)
            edge *= 2.0
        edges = sorted(set(edges))
        total = 0.0
        opts = dict(epsabs=1e-18, epsrel=1e-12, limit=200)
        for lo, hi in zip(edges, edges[1:] + [b]):
            if math.isinf(hi):
                # rho = lo / u maps the infinite panel onto (0, 1]
                total += integrate.quad(lambda u: fn(lo / u) * lo / (u * u), 0.0, 1.0, **opts)[0]
            elif hi > lo:
                total += integrate.quad(fn, lo, hi, **opts)[0]
        return total

    inner = quad(lambda p: profile(p) * p * p, 0.0, r) / r
    outer = quad(lambda p: profile(p) * p, r, R)
    return -(inner + outer)


@dataclass(frozen=True)
class PoissonCheck:
    residual: float
    h2_scale: float
    h: float

    def to_dict(self):
        return {"residual": self.residual, "h2_scale": self.h2_scale, "h": self.h}


def verify_poisson(w_sampler, f: ScalarField, test_points, h: float = 1e-2) -> PoissonCheck:
    """max |Delta_h w - f| over the test points, with the 7-point Laplacian."""
    pts = np.atleast_2d(np.asarray(test_points, dtype=float))
    worst = 0.0
    for p in pts:
        lap = fd_laplacian(lambda y: np.asarray(w_sampler(y), dtype=float), p, h, order=2)
        worst = max(worst, abs(float(lap) - float(f.eval(p))))
    return PoissonCheck(worst, h * h, h)


def radial_identity_constant(n: int, zeta: float) -> float:
    """c with Delta |x|^(2-zeta) = c |x|^(-zeta) in R^n."""
    return (2.0 - zeta) * (n - zeta)


def check_radial_identity(n: int, zeta: float, r: float = 10.0, h: float = 1e-2) -> float:
    """Relative error of the fourth-order FD Laplacian of |x|^(2-zeta) against c |x|^(-zeta).

    The error is scaled by max(|c|, |2 - zeta|) r^(-zeta) so that the harmonic
    case zeta = n (c = 0) is measured against the size of a single second
    derivative instead of dividing by zero.
    """
    direction = np.ones(n) / math.sqrt(n)
    x = r * direction

    def u(y):
        return np.linalg.norm(y, axis=-1) ** (2.0 - zeta)

    lap = float(fd_laplacian(u, x, h, order=4))
    c = radial_identity_constant(n, zeta)
    exact = c * r ** (-zeta)
    return abs(lap - exact) / (max(abs(c), abs(2.0 - zeta)) * r ** (-zeta))


def measure_decay(f: ScalarField, r_min: float = 100.0, r_max: float = 1e5, shells: int = 16,
                  truncation_R: float | None = None, quad_spec: QuadSpec | None = None,
                  direction=(0.48, 0.6, 0.64)) -> DecayReport:
    """Fit the decay of w - w(inf) on geometric shells along one ray."""
    r = np.geomspace(r_min, r_max, shells)
    R = truncation_R or 4.0 * r_max
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    w = np.array([newtonian_potential(f, ri * d, R, quad_spec).value for ri in r])
    return fit_decay(r, w, allow_log=True, offset=True)
