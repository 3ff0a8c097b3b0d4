"""Numerical checks of asymptotic expansions at infinity for the operator
family F_tau(lambda(D^2 u)) = f."""

from .operator_core import SymMatrix, TauParams, check_domain, eval_DF, eval_F

__version__ = "0.1.0"

__all__ = ["SymMatrix", "TauParams", "check_domain", "eval_DF", "eval_F", "__version__"]
