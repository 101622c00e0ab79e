"""MAP estimation by minimizing Phi over the feasible box E_gamma.

For the pure denoising objective Phi(x) = ||x - z||^2 / 2 the minimizer
is available in closed form as the componentwise clamp of z onto the
box.  For general differentiable forward models the solver runs a
projected-gradient (forward-backward) iteration

    x+ = clamp(x - tau * grad Phi(x))

with Armijo backtracking on tau, stopping when the fixed-point residual

    || x - clamp(x - grad Phi(x)) ||_inf

falls below the tolerance.  The residual vanishes exactly at points
satisfying first-order optimality on the box; for nonconvex forward
models that certifies stationarity only, and the returned point is a
local minimizer candidate, deterministic in (x0, step0).  Semismooth
Newton is a known faster alternative for these fixed-point equations
and is left as an extension point.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, DomainError
from .posterior import PosteriorSpec, grad_phi_array, phi_array
from .sequence_core import SeqPoint, WeightSequence, box_project, in_E_gamma

__all__ = [
    "SolveReport",
    "solve_map_denoising",
    "solve_map_pg",
    "fixed_point_residual",
]

#: Armijo sufficient-decrease constant.
_ARMIJO_C = 1e-4
#: Backtracking stops once tau falls below this fraction of step0.
_STEP_FLOOR = 1e-12


@dataclass(frozen=True)
class SolveReport:
    """Solver trace: the (feasible) solution, its objective value, the
    final fixed-point residual, and the strictly decreasing sequence of
    objective values of the accepted iterates."""

    solution: SeqPoint
    objective: float
    fp_residual: float
    iterations: int
    objective_trace: tuple[float, ...]
    termination: str  # "converged" | "max_iter" | "line_search_failure"

    def to_json(self) -> str:
        return json.dumps(
            {
                "solution": {"coeffs": list(self.solution.coeffs)},
                "objective": self.objective,
                "fp_residual": self.fp_residual,
                "iterations": self.iterations,
                "objective_trace": list(self.objective_trace),
                "termination": self.termination,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SolveReport":
        obj = json.loads(text)
        return cls(
            solution=SeqPoint(tuple(obj["solution"]["coeffs"])),
            objective=obj["objective"],
            fp_residual=obj["fp_residual"],
            iterations=obj["iterations"],
            objective_trace=tuple(obj["objective_trace"]),
            termination=obj["termination"],
        )


def solve_map_denoising(gamma: WeightSequence, z: SeqPoint) -> SeqPoint:
    """Closed-form MAP estimate for Phi(x) = ||x - z||^2 / 2: the unique
    minimizer over the box is the componentwise clamp of z."""
    return box_project(z, gamma)


def _box_bounds(spec: PosteriorSpec, dims: int) -> np.ndarray:
    return spec.gamma.weights_upto(dims)


def solve_map_pg(
    spec: PosteriorSpec,
    x0: SeqPoint | None = None,
    step0: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 10000,
) -> SolveReport:
    """Projected-gradient minimization of Phi over the box.

    The starting point is projected onto the box before the first
    iteration.  Each step backtracks tau (halving, floor at
    1e-12 * step0) until the Armijo condition

        Phi(x+) <= Phi(x) + 1e-4 * <grad Phi(x), x+ - x>

    holds; the inner product is negative for projected steps, so every
    accepted step strictly decreases the objective.  Accepted step sizes
    warm-start the next iteration (doubled, capped at step0).
    """
    if not step0 > 0:
        raise DomainError(f"step0 must be positive, got {step0!r}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    if x0 is None:
        x0 = SeqPoint(())
    dims = max(len(spec.gamma.values), spec.forward.in_dim, len(x0.coeffs), 1)
    bounds = _box_bounds(spec, dims)
    x = np.clip(x0.as_array(dims), -bounds, bounds)
    phi_x = phi_array(spec, x)
    trace = [phi_x]
    termination = "max_iter"
    iterations = 0
    tau = step0
    for _ in range(max_iter):
        g = grad_phi_array(spec, x)
        fp = float(np.max(np.abs(x - np.clip(x - g, -bounds, bounds))))
        if fp <= tol:
            termination = "converged"
            break
        tau = min(2.0 * tau, step0)
        accepted = False
        while tau >= _STEP_FLOOR * step0:
            x_new = np.clip(x - tau * g, -bounds, bounds)
            step = x_new - x
            if np.any(step != 0.0):
                phi_new = phi_array(spec, x_new)
                if phi_new <= phi_x + _ARMIJO_C * float(g @ step):
                    accepted = True
                    break
            tau *= 0.5
        if not accepted:
            termination = "line_search_failure"
            break
        x = x_new
        phi_x = phi_new
        trace.append(phi_x)
        iterations += 1
    g = grad_phi_array(spec, x)
    fp_final = float(np.max(np.abs(x - np.clip(x - g, -bounds, bounds))))
    return SolveReport(
        solution=SeqPoint.from_array(x),
        objective=phi_x,
        fp_residual=fp_final,
        iterations=iterations,
        objective_trace=tuple(trace),
        termination=termination,
    )


def fixed_point_residual(spec: PosteriorSpec, x: SeqPoint) -> float:
    """|| x - clamp(x - grad Phi(x)) ||_inf, zero exactly at first-order
    optimal points of the box-constrained problem.

    Points outside the box are projected first (with a warning): the
    residual is a meaningful optimality measure only on the box.
    """
    dims = max(len(spec.gamma.values), spec.forward.in_dim, len(x.coeffs), 1)
    bounds = _box_bounds(spec, dims)
    arr = x.as_array(dims)
    if not in_E_gamma(x, spec.gamma):
        warnings.warn(
            "point lies outside E_gamma; projecting it onto the box before "
            "computing the fixed-point residual",
            stacklevel=2,
        )
        arr = np.clip(arr, -bounds, bounds)
    g = grad_phi_array(spec, arr)
    if not np.all(np.isfinite(g)):
        raise EvaluationError("gradient evaluated to a non-finite value")
    return float(np.max(np.abs(arr - np.clip(arr - g, -bounds, bounds))))
