"""Semantic exception hierarchy shared by all genmap modules.

The CLI maps these onto exit codes: DomainError and its siblings are
"domain errors" (exit 1), everything argparse/file related is a usage
error (exit 2).
"""


class GenmapError(Exception):
    """Base class for all errors raised by genmap."""


class DomainError(GenmapError, ValueError):
    """An argument violates an operation's contract (bad radius, point
    outside the feasible box, non-SPD covariance, ...)."""


class EstimationError(GenmapError, RuntimeError):
    """A Monte Carlo estimate degenerated (all importance weights
    underflowed, empty ball, ...)."""


class EvaluationError(GenmapError, RuntimeError):
    """A forward-model or gradient evaluation produced non-finite
    values or failed outright."""
