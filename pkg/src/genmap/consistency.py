"""Frequentist consistency experiments for generalized MAP estimates.

Small-noise mode: for each noise scale in a decreasing schedule, draw
data y = F(truth) + scale * eta with eta ~ N(0, Sigma), solve the MAP
problem, and record the sup-norm error, the whitened forward residual
|| Sigma^{-1/2} (F(x_n) - F(truth)) ||, and the bound 2 * scale *
|| Sigma^{-1/2} eta || that every exact minimizer satisfies (it follows
algebraically from the minimizer beating the truth's objective value;
a violation therefore flags a solver failure, not randomness).

Large-sample mode: for each sample count n, draw n data vectors
y_j = F(truth) + scale * eta_j and minimize the summed misfit.  For
Gaussian likelihoods this reduces to sufficient statistics: a single
solve against the mean datum with noise scale scale / sqrt(n), so the
storage stays O(1) in n.  The analogous residual bound uses the mean
noise:  2 * scale * || Sigma^{-1/2} eta_bar ||.

Convergence "in probability" can only be certified as a finite-sample
trend; the verdict uses explicit thresholds (final exceedance at most
0.1, one exceedance inversion of at most one replicate allowed) and
always reports the full exceedance sequence.

Every replicate draws from its own RNG stream keyed by (row, replicate),
so tables are bit-identical across runs and thread counts.  For
non-injective forward maps only the residual columns are conclusive;
the error columns are informational.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError
from .map_solver import solve_map_pg
from .parallel import run_tasks
from .posterior import ForwardModel, PosteriorSpec, forward_from_obj
from .sequence_core import SeqPoint, WeightSequence, in_E_gamma, sup_norm
from .uniform_prior import RngSpec

__all__ = [
    "SpecTemplate",
    "ExperimentPlan",
    "ConsistencyRow",
    "ConsistencyTable",
    "ConvergenceVerdict",
    "run_small_noise",
    "run_large_sample",
    "convergence_in_probability_test",
]

SMALL_NOISE = "small-noise"
LARGE_SAMPLE = "large-sample"


@dataclass(frozen=True)
class SpecTemplate:
    """A posterior specification without data: the per-replicate data
    vector is generated by the experiment itself."""

    gamma: WeightSequence
    forward: ForwardModel
    noise_cov: np.ndarray
    noise_scale: float = 1.0

    def __post_init__(self):
        cov = np.array(self.noise_cov, dtype=float)
        k = self.forward.out_dim
        if cov.shape != (k, k):
            raise DomainError(f"noise covariance has shape {cov.shape}, expected ({k}, {k})")
        if not self.noise_scale > 0:
            raise DomainError("noise scale must be positive")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DomainError("noise covariance must be positive definite") from exc
        cov.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    def spec_for(self, data: np.ndarray, noise_scale: float) -> PosteriorSpec:
        return PosteriorSpec(
            gamma=self.gamma,
            forward=self.forward,
            data=data,
            noise_cov=self.noise_cov,
            noise_scale=noise_scale,
        )


@dataclass(frozen=True)
class ExperimentPlan:
    """A reproducible consistency experiment: template, true point in
    E_gamma, a strictly monotone schedule (decreasing noise scales or
    increasing sample counts), the replicate count, and the seed."""

    template: SpecTemplate
    truth: SeqPoint
    schedule: tuple[float, ...]
    mode: str
    replicates: int
    seed: RngSpec

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(self.schedule))
        if self.mode not in (SMALL_NOISE, LARGE_SAMPLE):
            raise DomainError(f"unknown mode {self.mode!r}")
        if not in_E_gamma(self.truth, self.template.gamma):
            raise DomainError("truth must lie in E_gamma")
        if self.replicates < 1:
            raise DomainError("need at least one replicate")
        if len(self.schedule) < 1:
            raise DomainError("empty schedule")
        if self.mode == SMALL_NOISE:
            for v in self.schedule:
                if v < 0:
                    raise DomainError("noise scales must be non-negative")
            for a, b in zip(self.schedule, self.schedule[1:]):
                if not b < a:
                    raise DomainError("noise schedule must be strictly decreasing")
        else:
            for v in self.schedule:
                if int(v) != v or v < 1:
                    raise DomainError("sample counts must be positive integers")
            for a, b in zip(self.schedule, self.schedule[1:]):
                if not b > a:
                    raise DomainError("sample-count schedule must be strictly increasing")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        obj = json.loads(text)
        tmpl = obj["template"]
        gamma = WeightSequence.from_json(json.dumps(tmpl["gamma"]))
        template = SpecTemplate(
            gamma=gamma,
            forward=forward_from_obj(tmpl["forward"], default_dim=max(len(gamma), 1)),
            noise_cov=np.array(tmpl["noise_cov"], dtype=float),
            noise_scale=float(tmpl.get("noise_scale", 1.0)),
        )
        seed = obj.get("seed", {})
        return cls(
            template=template,
            truth=SeqPoint(tuple(obj["truth"]["coeffs"])),
            schedule=tuple(obj["schedule"]),
            mode=obj["mode"],
            replicates=int(obj["replicates"]),
            seed=RngSpec(seed=int(seed.get("seed", 42)), stream=int(seed.get("stream", 0))),
        )


@dataclass(frozen=True)
class ConsistencyRow:
    """Per-replicate statistics for one schedule entry."""

    schedule_value: float
    errors: tuple[float, ...]
    residuals: tuple[float, ...]
    residual_bounds: tuple[float, ...]
    solver_status: tuple[str, ...]
    exceedance: tuple[float, ...]  # aligned with the table's eps_list

    @property
    def failure_fraction(self) -> float:
        bad = sum(1 for s in self.solver_status if s != "converged")
        return bad / len(self.solver_status)

    @property
    def flagged(self) -> bool:
        """True when more than 20% of the replicates failed to solve."""
        return self.failure_fraction > 0.2


@dataclass(frozen=True)
class ConsistencyTable:
    mode: str
    replicates: int
    eps_list: tuple[float, ...]
    rows: tuple[ConsistencyRow, ...]

    def to_csv(self) -> str:
        lines = ["schedule_value,replicate,error,residual,solver_status"]
        for row in self.rows:
            for i in range(self.replicates):
                lines.append(
                    f"{row.schedule_value!r},{i},{row.errors[i]!r},"
                    f"{row.residuals[i]!r},{row.solver_status[i]}"
                )
        return "\n".join(lines) + "\n"


def _run_replicate(
    plan: ExperimentPlan,
    row_idx: int,
    rep: int,
    y_true: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[float, float, float, str]:
    template = plan.template
    k = template.forward.out_dim
    gen = plan.seed.generator(row_idx, rep)
    value = plan.schedule[row_idx]
    if plan.mode == SMALL_NOISE:
        scale = value
        if scale == 0.0:
            data, solve_scale, bound = y_true, 1.0, 0.0
        else:
            zeta = gen.standard_normal(k)
            data = y_true + scale * (template.chol @ zeta)
            solve_scale = scale
            bound = 2.0 * scale * float(np.linalg.norm(zeta))
    else:
        n = int(value)
        zeta_bar = gen.standard_normal((n, k)).mean(axis=0)
        data = y_true + template.noise_scale * (template.chol @ zeta_bar)
        solve_scale = template.noise_scale / math.sqrt(n)
        bound = 2.0 * template.noise_scale * float(np.linalg.norm(zeta_bar))
    try:
        report = solve_map_pg(
            template.spec_for(data, solve_scale), tol=tol, max_iter=max_iter
        )
        status = report.termination
        solution = report.solution
    except Exception as exc:  # solver failures are recorded, not fatal
        return math.nan, math.nan, bound, f"error: {exc}"
    dims = max(len(solution.coeffs), len(plan.truth.coeffs), 1)
    diff = solution.as_array(dims) - plan.truth.as_array(dims)
    error = float(np.max(np.abs(diff)))
    whitened = solve_triangular(
        template.chol, template.forward.apply(solution.as_array(1)) - y_true, lower=True
    )
    residual = float(np.linalg.norm(whitened))
    return error, residual, bound, status


def _run(plan, eps_list, tol, max_iter, threads) -> ConsistencyTable:
    eps_list = tuple(float(e) for e in eps_list)
    for e in eps_list:
        if not e > 0:
            raise DomainError(f"eps thresholds must be positive, got {e!r}")
    y_true = plan.template.forward.apply(plan.truth.as_array(1))
    rows = []
    for row_idx, value in enumerate(plan.schedule):
        tasks = [
            (plan, row_idx, rep, y_true, tol, max_iter) for rep in range(plan.replicates)
        ]
        results = run_tasks(_run_replicate, tasks, threads=threads)
        errors = tuple(r[0] for r in results)
        residuals = tuple(r[1] for r in results)
        bounds = tuple(r[2] for r in results)
        status = tuple(r[3] for r in results)
        exceedance = tuple(
            sum(1 for err in errors if err > e) / plan.replicates for e in eps_list
        )
        rows.append(
            ConsistencyRow(
                schedule_value=float(value),
                errors=errors,
                residuals=residuals,
                residual_bounds=bounds,
                solver_status=status,
                exceedance=exceedance,
            )
        )
    return ConsistencyTable(
        mode=plan.mode, replicates=plan.replicates, eps_list=eps_list, rows=tuple(rows)
    )


def run_small_noise(
    plan: ExperimentPlan,
    eps_list: Sequence[float],
    tol: float = 1e-8,
    max_iter: int = 10000,
    threads: int = 1,
) -> ConsistencyTable:
    """Run the decreasing-noise experiment; see the module docstring."""
    if plan.mode != SMALL_NOISE:
        raise DomainError(f"plan mode is {plan.mode!r}, expected {SMALL_NOISE!r}")
    return _run(plan, eps_list, tol, max_iter, threads)


def run_large_sample(
    plan: ExperimentPlan,
    eps_list: Sequence[float],
    tol: float = 1e-8,
    max_iter: int = 10000,
    threads: int = 1,
) -> ConsistencyTable:
    """Run the growing-sample-count experiment; see the module docstring."""
    if plan.mode != LARGE_SAMPLE:
        raise DomainError(f"plan mode is {plan.mode!r}, expected {LARGE_SAMPLE!r}")
    return _run(plan, eps_list, tol, max_iter, threads)


@dataclass(frozen=True)
class ConvergenceVerdict:
    passed: bool
    eps: float
    exceedances: tuple[float, ...]
    final_exceedance: float
    inversions: int
    max_inversion: float
    reason: str


def convergence_in_probability_test(table: ConsistencyTable, eps: float) -> ConvergenceVerdict:
    """Trend test for P(error > eps) -> 0 along the schedule.

    PASS requires the final empirical exceedance to be at most 0.1 and
    the exceedance sequence to be non-increasing up to at most one
    inversion of at most one replicate (1/R).  Exceedances are counted
    in integer replicates, so the thresholds are exact.
    """
    if len(table.rows) < 4:
        raise DomainError(f"need at least 4 rows, got {len(table.rows)}")
    if table.replicates < 30:
        raise DomainError(f"need at least 30 replicates, got {table.replicates}")
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    r = table.replicates
    counts = [sum(1 for err in row.errors if err > eps) for row in table.rows]
    inversions = [b - a for a, b in zip(counts, counts[1:]) if b > a]
    final_ok = 10 * counts[-1] <= r
    monotone_ok = len(inversions) <= 1 and all(d <= 1 for d in inversions)
    passed = final_ok and monotone_ok
    if passed:
        reason = "final exceedance within threshold, trend non-increasing"
    elif not final_ok:
        reason = f"final exceedance {counts[-1]}/{r} exceeds 0.1"
    else:
        reason = f"{len(inversions)} inversions (max {max(inversions)}/{r} replicates)"
    return ConvergenceVerdict(
        passed=passed,
        eps=float(eps),
        exceedances=tuple(c / r for c in counts),
        final_exceedance=counts[-1] / r,
        inversions=len(inversions),
        max_inversion=(max(inversions) / r) if inversions else 0.0,
        reason=reason,
    )
