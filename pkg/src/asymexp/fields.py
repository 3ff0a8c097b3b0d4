"""Scalar fields on R^n with optional analytic derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class DecayMeta:
    """Behaviour of a right-hand side at infinity.

    ``bound_constant`` is a C with |f - f_infinity| <= C (1+|y|)^(-zeta) and
    ``support_radius`` is set for compactly supported data; both feed the
    potential's tail bound.
    """

    f_infinity: float
    zeta_nominal: float
    bound_constant: Optional[float] = None
    support_radius: Optional[float] = None


@dataclass(frozen=True)
class ScalarField:
    """A function on R^n evaluated at point arrays of shape ``(..., n)``.

    ``grad`` returns ``(..., n)`` and ``hess`` returns ``(..., n, n)``.
    ``deviation`` optionally evaluates ``f - f_infinity`` directly, for fields
    whose decaying part would otherwise be lost to cancellation.
    ``radial_breaks`` lists radii where the field is not smooth; quadrature
    routines put panel boundaries there.
    """

    dim: int
    eval: Callable[[Array], Array]
    grad: Optional[Callable[[Array], Array]] = None
    hess: Optional[Callable[[Array], Array]] = None
    decay_meta: Optional[DecayMeta] = None
    deviation: Optional[Callable[[Array], Array]] = None
    radial_breaks: tuple = ()

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def minus(self, other: "ScalarField") -> "ScalarField":
        """Pointwise difference; derivatives are kept only when both have them."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        grad = hess = None
        if self.grad is not None and other.grad is not None:
            def grad(x, a=self.grad, b=other.grad):
                return a(x) - b(x)
        if self.hess is not None and other.hess is not None:
            def hess(x, a=self.hess, b=other.hess):
                return a(x) - b(x)
        return ScalarField(self.dim, lambda x, a=self.eval, b=other.eval: a(x) - b(x), grad, hess)


def quadratic_field(A, b=None, c: float = 0.0) -> ScalarField:
    """Q(x) = x^T A x / 2 + b.x + c with exact derivatives."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)

    def ev(x):
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + x @ b + c

    def gr(x):
        return x @ A + b

    def he(x):
        return np.broadcast_to(A, np.shape(x)[:-1] + (n, n)).copy()

    return ScalarField(n, ev, gr, he)


def constant_field(n: int, value: float, zeta: float = np.inf) -> ScalarField:
    def ev(x):
        return np.full(np.shape(x)[:-1], float(value))

    def dev(x):
        return np.zeros(np.shape(x)[:-1])

    return ScalarField(n, ev, decay_meta=DecayMeta(float(value), zeta, 0.0), deviation=dev)
