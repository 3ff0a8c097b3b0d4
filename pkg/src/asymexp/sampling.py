"""Random test matrices and finite-difference helpers shared by the suite."""

from __future__ import annotations

import math

import numpy as np

from .operator_core import TauParams, eval_F, lower_bound

BRANCH_TAUS = (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_admissible(tau: TauParams, n: int, rng: np.random.Generator,
                      min_margin: float = 0.2, spread: float = 3.0) -> np.ndarray:
    """Random symmetric matrix whose eigenvalues clear the branch bound by
    at least ``min_margin``."""
    bound = lower_bound(tau)
    if math.isinf(bound):
        lam = rng.uniform(-spread, spread, size=n)
    else:
        lam = bound + rng.uniform(min_margin, min_margin + spread, size=n)
    R = random_orthogonal(n, rng)
    M = (R * lam) @ R.T
    return 0.5 * (M + M.T)


def fd_matrix_gradient(tau: TauParams, M: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of eval_F along symmetrized unit perturbations."""
    n = M.shape[0]
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] += 0.5
            E[j, i] += 0.5
            G[i, j] = G[j, i] = (eval_F(tau, M + step * E) - eval_F(tau, M - step * E)) / (2 * step)
    return G


def fd_gradient(func, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of a vectorized function at points x (..., n).

    The derivative direction is appended as the last axis, so a gradient
    callable yields its Jacobian (the Hessian) with entry [..., j, i] =
    d g_j / d x_i.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        cols.append((func(x + e) - func(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def fd_hessian(func, x: np.ndarray, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.empty(x.shape + (n,))
    f0 = func(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[..., i, i] = (func(x + ei) - 2 * f0 + func(x - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            v = (func(x + ei + ej) - func(x + ei - ej) - func(x - ei + ej) + func(x - ei - ej)) / (4 * h * h)
            out[..., i, j] = out[..., j, i] = v
    return out


def fd_laplacian(func, x: np.ndarray, h: float, order: int = 2) -> np.ndarray:
    """Finite-difference Laplacian; ``order`` 2 is the (2n+1)-point stencil,
    ``order`` 4 the five-point-per-axis fourth-order stencil."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    f0 = func(x)
    total = np.zeros(np.shape(f0))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        if order == 2:
            total = total + (func(x + e) - 2 * f0 + func(x - e)) / h**2
        elif order == 4:
            total = total + (-func(x + 2 * e) + 16 * func(x + e) - 30 * f0
                             + 16 * func(x - e) - func(x - 2 * e)) / (12 * h**2)
        else:
            raise ValueError("order must be 2 or 4")
    return total
