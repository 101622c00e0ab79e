"""Posterior measure machinery for Gaussian-noise inverse problems on
the uniform series prior.

The posterior has density exp(-Phi(x)) / Z with respect to the prior,
where Phi is the weighted half squared data misfit

    Phi(x) = 1 / (2 * noise_scale**2) * || Sigma^{-1/2} (F(x) - y) ||^2.

The objective whose minimizers are the generalized MAP estimates is

    I(x) = Phi(x)  if x lies in the feasible box E_gamma,  +inf otherwise.

Ball probabilities of the posterior are estimated by importance sampling
from the prior, which cancels the unknown normalization Z.  Ratio checks
along a radius schedule reuse one shared sample set for all radii (far
lower variance, at the cost of correlated schedule entries) and exploit
that prior ball probabilities are constant across centers in the
shrunken box: the prior factor of each ball is computed exactly and
only the conditional mean of exp(-Phi) inside the ball is estimated.
The importance weights are formed as exp(-(Phi - min Phi)) so that they
cannot all underflow even for tiny noise scales.

Only MAP-style summaries are provided here; full posterior exploration
(MCMC and friends) is out of scope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, EstimationError, EvaluationError
from .parallel import run_tasks, sample_chunks
from .schedules import check_decreasing
from .sequence_core import SeqPoint, WeightSequence, in_E_gamma, project_delta
from .uniform_prior import BallEstimate, RngSpec, ball_prob_exact, default_truncation

__all__ = [
    "ForwardModel",
    "PosteriorSpec",
    "OmRatioPoint",
    "linear_model",
    "componentwise_square_model",
    "bounded_smooth_model",
    "likelihood_phi",
    "om_functional",
    "grad_phi",
    "posterior_ball_prob_mc",
    "om_ratio_check",
]


@dataclass(frozen=True)
class ForwardModel:
    """A forward operator acting on the first ``in_dim`` coefficients.

    ``eval`` maps an input array of length in_dim to the K = out_dim
    data entries.  ``grad_adjoint``, when present, applies the adjoint
    of the derivative: (x, v) -> F'(x)* v, an array of length in_dim.
    ``eval_many`` is an optional vectorized evaluation over sample rows;
    without it, batches fall back to a per-row loop.  ``lipschitz_hint``
    optionally maps a radius to a Lipschitz bound of F on that ball; it
    is informational only.  Evaluations must be deterministic and
    reentrant.
    """

    out_dim: int
    in_dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    grad_adjoint: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    eval_many: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_hint: Optional[Callable[[float], float]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.out_dim < 1 or self.in_dim < 1:
            raise DomainError("forward model dimensions must be positive")

    def _embed(self, x: np.ndarray) -> np.ndarray:
        """First in_dim coefficients, zero-padded if x is shorter."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] == self.in_dim:
            return x
        if x.shape[-1] > self.in_dim:
            return x[..., : self.in_dim]
        out = np.zeros(x.shape[:-1] + (self.in_dim,))
        out[..., : x.shape[-1]] = x
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(self.eval(self._embed(x)), dtype=float)
        if y.shape != (self.out_dim,):
            raise EvaluationError(
                f"forward model returned shape {y.shape}, expected ({self.out_dim},)"
            )
        return y

    def apply_many(self, xs: np.ndarray) -> np.ndarray:
        xs = self._embed(np.asarray(xs, dtype=float))
        if self.eval_many is not None:
            out = np.asarray(self.eval_many(xs), dtype=float)
        else:
            out = np.stack([self.apply(row) for row in xs])
        if out.shape != (xs.shape[0], self.out_dim):
            raise EvaluationError(f"batched forward evaluation has shape {out.shape}")
        return out

    def adjoint(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.grad_adjoint is None:
            raise DomainError(f"forward model {self.name!r} provides no gradient adjoint")
        g = np.asarray(
            self.grad_adjoint(self._embed(x), np.asarray(v, dtype=float)), dtype=float
        )
        if g.shape != (self.in_dim,):
            raise EvaluationError(f"adjoint returned shape {g.shape}, expected ({self.in_dim},)")
        return g


def linear_model(matrix) -> ForwardModel:
    """F(x) = A x on the first (number of columns) coefficients."""
    a = np.array(matrix, dtype=float)
    if a.ndim != 2:
        raise DomainError("linear forward model needs a 2-d matrix")
    if not np.all(np.isfinite(a)):
        raise DomainError("linear forward model matrix must be finite")
    k, d = a.shape
    return ForwardModel(
        out_dim=k,
        in_dim=d,
        eval=lambda x: a @ x,
        grad_adjoint=lambda x, v: a.T @ v,
        eval_many=lambda xs: xs @ a.T,
        name="linear",
    )


def componentwise_square_model(dim: int) -> ForwardModel:
    """F(x)_k = x_k^2 with the diagonal adjoint F'(x)* v = 2 x v."""
    return ForwardModel(
        out_dim=dim,
        in_dim=dim,
        eval=lambda x: x**2,
        grad_adjoint=lambda x, v: 2.0 * x * v,
        eval_many=lambda xs: xs**2,
        name="square",
    )


def bounded_smooth_model(dim: int) -> ForwardModel:
    """F(x)_k = tanh(x_k): smooth, bounded, with the diagonal adjoint
    F'(x)* v = (1 - tanh(x)^2) v."""
    return ForwardModel(
        out_dim=dim,
        in_dim=dim,
        eval=np.tanh,
        grad_adjoint=lambda x, v: (1.0 - np.tanh(x) ** 2) * v,
        eval_many=np.tanh,
        name="tanh",
    )


_BUILTIN_MODELS = {
    "square": componentwise_square_model,
    "tanh": bounded_smooth_model,
}


def forward_from_obj(obj: dict, default_dim: int) -> ForwardModel:
    """Build a forward model from its JSON object representation:
    {"kind": "linear", "matrix": [[...]]} or
    {"kind": "builtin", "name": "square" | "tanh", "dim": int}."""
    kind = obj.get("kind")
    if kind == "linear":
        return linear_model(obj["matrix"])
    if kind == "builtin":
        name = obj.get("name")
        if name not in _BUILTIN_MODELS:
            raise DomainError(f"unknown builtin forward model {name!r}")
        return _BUILTIN_MODELS[name](int(obj.get("dim", default_dim)))
    raise DomainError(f"unknown forward model kind {kind!r}")


@dataclass(frozen=True)
class PosteriorSpec:
    """Everything defining one posterior: prior weights, forward model,
    observed data, noise covariance (SPD, used through its Cholesky
    factor, never inverted explicitly), and the noise scale."""

    gamma: WeightSequence
    forward: ForwardModel
    data: np.ndarray
    noise_cov: np.ndarray
    noise_scale: float = 1.0

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        cov = np.array(self.noise_cov, dtype=float)
        k = self.forward.out_dim
        if data.shape != (k,):
            raise DomainError(f"data has shape {data.shape}, forward model expects ({k},)")
        if cov.shape != (k, k):
            raise DomainError(f"noise covariance has shape {cov.shape}, expected ({k}, {k})")
        if not np.all(np.isfinite(data)) or not np.all(np.isfinite(cov)):
            raise DomainError("data and noise covariance must be finite")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise DomainError("noise covariance must be symmetric")
        if not self.noise_scale > 0:
            raise DomainError(f"noise scale must be positive, got {self.noise_scale!r}")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise DomainError("noise covariance must be positive definite") from exc
        data.flags.writeable = False
        cov.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of the noise covariance."""
        return self._chol

    @classmethod
    def from_json(cls, text: str) -> "PosteriorSpec":
        obj = json.loads(text)
        gamma = WeightSequence.from_json(json.dumps(obj["gamma"]))
        forward = forward_from_obj(obj["forward"], default_dim=max(len(gamma), 1))
        return cls(
            gamma=gamma,
            forward=forward,
            data=np.array(obj["data"], dtype=float),
            noise_cov=np.array(obj["noise_cov"], dtype=float),
            noise_scale=float(obj.get("noise_scale", 1.0)),
        )


# ---------------------------------------------------------------------------
# likelihood and objective
# ---------------------------------------------------------------------------


def _whiten(spec: PosteriorSpec, residual: np.ndarray) -> np.ndarray:
    """Sigma^{-1/2} r via a triangular solve with the Cholesky factor."""
    return solve_triangular(spec.chol, residual, lower=True)


def phi_array(spec: PosteriorSpec, x: np.ndarray) -> float:
    """Phi on a raw coefficient array."""
    z = _whiten(spec, spec.forward.apply(x) - spec.data)
    val = 0.5 * float(z @ z) / spec.noise_scale**2
    if not math.isfinite(val):
        raise EvaluationError("likelihood evaluated to a non-finite value")
    return val


def phi_batch(spec: PosteriorSpec, xs: np.ndarray) -> np.ndarray:
    """Phi over sample rows."""
    resid = spec.forward.apply_many(xs) - spec.data
    z = solve_triangular(spec.chol, resid.T, lower=True)
    return 0.5 * np.sum(z * z, axis=0) / spec.noise_scale**2


def grad_phi_array(spec: PosteriorSpec, x: np.ndarray) -> np.ndarray:
    """Gradient of Phi on a raw array, padded with zeros beyond the
    forward model's input dimension."""
    r = spec.forward.apply(x) - spec.data
    w = solve_triangular(spec.chol.T, _whiten(spec, r), lower=False)
    g_in = spec.forward.adjoint(x, w) / spec.noise_scale**2
    if not np.all(np.isfinite(g_in)):
        raise EvaluationError("gradient evaluated to a non-finite value")
    g = np.zeros(len(x))
    m = min(len(x), spec.forward.in_dim)
    g[:m] = g_in[:m]
    return g


def likelihood_phi(spec: PosteriorSpec, x: SeqPoint) -> float:
    """Phi(x) = ||Sigma^{-1/2}(F(x) - y)||^2 / (2 noise_scale^2)."""
    return phi_array(spec, x.as_array(spec.forward.in_dim))


def grad_phi(spec: PosteriorSpec, x: SeqPoint) -> SeqPoint:
    """Gradient of the likelihood as a point (needs the adjoint)."""
    return SeqPoint.from_array(grad_phi_array(spec, x.as_array(spec.forward.in_dim)))


def om_functional(spec: PosteriorSpec, x: SeqPoint) -> float:
    """The objective whose minimizers are the generalized MAP estimates:
    Phi(x) on the feasible box, +inf (IEEE infinity, which compares
    above every finite float) outside it."""
    if not in_E_gamma(x, spec.gamma):
        return math.inf
    return likelihood_phi(spec, x)


# ---------------------------------------------------------------------------
# importance sampling from the prior
# ---------------------------------------------------------------------------


def _draw_chunk(weights: np.ndarray, rng: RngSpec, idx: int, count: int) -> np.ndarray:
    gen = rng.generator(idx)
    return gen.uniform(-1.0, 1.0, (count, weights.size)) * weights


def _draw_prior_samples(
    gamma: WeightSequence, dim: int, n: int, rng: RngSpec, threads: int = 1
) -> np.ndarray:
    """n prior draws truncated at ``dim``, assembled from fixed-size
    chunks with one child stream each (thread-count independent)."""
    weights = gamma.weights_upto(dim)
    tasks = [(weights, rng, idx, count) for idx, count in sample_chunks(n)]
    chunks = run_tasks(_draw_chunk, tasks, threads=threads)
    return np.concatenate(chunks, axis=0) if len(chunks) > 1 else chunks[0]


def _importance_weights(spec: PosteriorSpec, samples: np.ndarray) -> np.ndarray:
    """exp(-(Phi - min Phi)) over sample rows; the shift makes the
    largest weight exactly one, so the weights cannot all underflow."""
    phi = phi_batch(spec, samples)
    if not np.all(np.isfinite(phi)):
        raise EvaluationError("likelihood produced non-finite values on prior samples")
    w = np.exp(-(phi - np.min(phi)))
    if not np.all(np.isfinite(w)) or float(np.sum(w)) <= 0.0:
        raise EstimationError("importance weights degenerated")
    return w


def posterior_ball_prob_mc(
    spec: PosteriorSpec,
    center: SeqPoint,
    radius: float,
    n: int,
    rng: RngSpec,
    threads: int = 1,
) -> BallEstimate:
    """Self-normalized importance-sampling estimate of the posterior
    probability of the sup-norm ball around ``center``:

        sum_i w_i 1[x_i in ball] / sum_i w_i,   w_i = exp(-Phi(x_i)),

    over n prior draws, with the delta-method standard error of the
    ratio.  The unknown normalization Z cancels.
    """
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius!r}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    trunc = default_truncation(spec.gamma, center, radius)
    dim = max(trunc, spec.forward.in_dim)
    samples = _draw_prior_samples(spec.gamma, dim, n, rng, threads)
    w = _importance_weights(spec, samples)
    inside = np.max(np.abs(samples - center.as_array(dim)), axis=1) < radius
    total = float(np.sum(w))
    p_hat = float(np.sum(w[inside])) / total
    w_norm = w / total
    se = math.sqrt(float(np.sum(w_norm**2 * (inside.astype(float) - p_hat) ** 2)))
    return BallEstimate(value=p_hat, method="monte_carlo", std_error=se, n_samples=n)


@dataclass(frozen=True)
class OmRatioPoint:
    """One schedule entry of the ratio check: the estimated posterior
    ball-probability ratio at this radius, the radius-independent
    prediction exp(I(x2) - I(x1)), and the estimate's standard error."""

    delta: float
    empirical_ratio: float
    predicted_ratio: float
    std_error: float


def _conditional_mean_weight(
    w: np.ndarray, samples: np.ndarray, center: np.ndarray, delta: float
) -> tuple[float, float, int]:
    """Mean and standard error of the importance weight conditional on
    the ball around ``center``, plus the in-ball sample count."""
    inside = np.max(np.abs(samples - center), axis=1) < delta
    count = int(np.count_nonzero(inside))
    if count < 2:
        raise EstimationError(
            f"only {count} of {samples.shape[0]} samples fall in the radius-{delta} ball; "
            "increase the sample count or the radius"
        )
    w_in = w[inside]
    mean = float(np.mean(w_in))
    se = float(np.std(w_in, ddof=1)) / math.sqrt(count)
    return mean, se, count


def om_ratio_check(
    spec: PosteriorSpec,
    x1: SeqPoint,
    x2: SeqPoint,
    deltas: Sequence[float],
    n: int,
    rng: RngSpec,
    threads: int = 1,
) -> list[OmRatioPoint]:
    """Estimate J^delta(P^delta x1) / J^delta(P^delta x2) for each radius
    in a decreasing schedule and compare against the constant prediction
    exp(I(x2) - I(x1)).

    The projected centers lie in the shrunken box, where prior ball
    probabilities coincide exactly; each posterior ball probability thus
    factors into (exact, identical prior factor) x (conditional mean of
    exp(-Phi) inside the ball), and only the conditional means are
    estimated, from one sample set shared across the whole schedule.
    In particular a flat likelihood yields an empirical ratio of exactly
    one at every radius, and so does x1 = x2.
    """
    check_decreasing(deltas)
    for name, x in (("x1", x1), ("x2", x2)):
        if not in_E_gamma(x, spec.gamma):
            raise DomainError(f"{name} must lie in E_gamma")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    delta_min = min(deltas)
    trunc = max(
        default_truncation(spec.gamma, x1, delta_min),
        default_truncation(spec.gamma, x2, delta_min),
    )
    dim = max(trunc, spec.forward.in_dim)
    samples = _draw_prior_samples(spec.gamma, dim, n, rng, threads)
    w = _importance_weights(spec, samples)
    predicted = math.exp(om_functional(spec, x2) - om_functional(spec, x1))
    out = []
    for delta in deltas:
        c1 = project_delta(x1, spec.gamma, delta)
        c2 = project_delta(x2, spec.gamma, delta)
        m1, se1, _ = _conditional_mean_weight(w, samples, c1.as_array(dim), delta)
        m2, se2, _ = _conditional_mean_weight(w, samples, c2.as_array(dim), delta)
        prior1 = ball_prob_exact(spec.gamma, c1, delta).value
        prior2 = ball_prob_exact(spec.gamma, c2, delta).value
        ratio = (prior1 * m1) / (prior2 * m2)
        rel_se = math.sqrt((se1 / m1) ** 2 + (se2 / m2) ** 2)
        out.append(
            OmRatioPoint(
                delta=float(delta),
                empirical_ratio=ratio,
                predicted_ratio=predicted,
                std_error=ratio * rel_se,
            )
        )
    return out
