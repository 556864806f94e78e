"""Lax-Friedrichs splitting solver and a-priori estimate audits for 1D scalar balance laws."""

from .expr import Expr, Jet2, ExprDomainError, ExprSyntaxError, eval_jet, parse, sup_abs_on_box

__version__ = "0.1.0"
