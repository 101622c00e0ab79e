"""The uniform series prior: sampling, exact small-ball probabilities,
componentwise ratio formulas, and mode classification.

The prior is the law of the random series sum_k gamma_k * xi_k * e_k
with independent xi_k uniform on [-1, 1].  Coordinates are independent,
so the probability of a sup-norm ball factorizes:

    mu(B^delta(x)) = prod_k P(gamma_k * xi_k in (x_k - delta, x_k + delta)),

and only the finitely many indices with gamma_k + |x_k| > delta
contribute factors below one.  Closed balls and open balls carry the
same mass (each factor is a uniform measure of an interval), so all
exact computations use open intervals; the Monte Carlo estimator uses
the matching strict inequality sup|s - x| < delta.

Numerics: factors are multiplied in ascending index order, skipping
factors equal to one; if any factor drops below 1e-8 the product is
accumulated in log space to avoid underflow.  Power-law tail blocks
with x_k = 0 contribute prod (delta / gamma_k), whose logarithm has the
closed form count * log(delta/c) + p * (lgamma(b+1) - lgamma(a)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .parallel import run_tasks, sample_chunks
from .schedules import check_decreasing
from .sequence_core import SeqPoint, WeightSequence, in_E_gamma

__all__ = [
    "RngSpec",
    "BallEstimate",
    "sample_prior",
    "component_ratio",
    "ball_prob_exact",
    "max_ball_prob",
    "ball_prob_mc",
    "classify_generalized_mode",
    "strong_mode_diagnostic",
]

#: below this factor value the product switches to log-space accumulation
_LOG_SPACE_CUTOFF = 1e-8


@dataclass(frozen=True)
class RngSpec:
    """Reproducible random source: identical (seed, stream) pairs yield
    identical draws.  Sub-streams for worker fan-out derive from the
    same seed with extended spawn keys."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if int(self.stream) < 0:
            raise DomainError(f"stream must be non-negative, got {self.stream!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", int(self.stream))

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Generator for this stream, or a child stream keyed by
        (stream, *subkeys)."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *subkeys))
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class BallEstimate:
    """A ball-probability value with provenance.

    Exact products carry std_error = 0 and n_samples = 0.  Monte Carlo
    estimates carry the binomial (or delta-method) standard error, which
    degenerates to 0 when the empirical fraction hits 0 or 1.
    """

    value: float
    method: str  # "exact_product" | "monte_carlo"
    std_error: float = 0.0
    n_samples: int = 0

    def __post_init__(self):
        if self.method not in ("exact_product", "monte_carlo"):
            raise DomainError(f"unknown method {self.method!r}")
        if not (0.0 <= self.value <= 1.0):
            raise DomainError(f"probability out of [0, 1]: {self.value!r}")
        if self.std_error < 0:
            raise DomainError("std_error must be non-negative")
        if self.method == "exact_product" and (self.std_error != 0.0 or self.n_samples != 0):
            raise DomainError("exact products carry no statistical error")

    def to_json(self) -> str:
        return json.dumps(
            {
                "value": self.value,
                "method": self.method,
                "std_error": self.std_error,
                "n_samples": self.n_samples,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BallEstimate":
        obj = json.loads(text)
        return cls(
            value=obj["value"],
            method=obj["method"],
            std_error=obj.get("std_error", 0.0),
            n_samples=obj.get("n_samples", 0),
        )


def _interval_prob(gamma_k: float, center_abs: float, delta: float) -> float:
    """P(gamma_k * xi in (c - delta, c + delta)) for xi ~ U[-1, 1] and
    |c| = center_abs.

    Computed by case split rather than generic interval intersection so
    that the result depends only on (gamma_k, |c|, delta); centers deep
    inside the box then produce bit-identical factors.
    """
    if gamma_k == 0.0:
        # point mass at zero; the open interval must strictly contain 0
        return 1.0 if center_abs < delta else 0.0
    # interval inside the support: evaluated as |c| <= gamma_k - delta, the
    # same float expression that clamps the metric projection, so projected
    # centers land in this branch bit-for-bit
    if center_abs <= gamma_k - delta:
        return delta / gamma_k
    if delta <= center_abs - gamma_k:
        return 0.0
    if delta >= gamma_k + center_abs:
        return 1.0
    return (gamma_k - center_abs + delta) / (2.0 * gamma_k)


def _trimmed_support(x: SeqPoint) -> int:
    """Index of the last nonzero coefficient (0 for the origin)."""
    m = len(x.coeffs)
    while m > 0 and x.coeffs[m - 1] == 0.0:
        m -= 1
    return m


def _tail_log_product(gamma: WeightSequence, start: int, delta: float) -> float:
    """log prod_{k >= start, gamma_k > delta} (delta / gamma_k) over a
    power-law tail block with zero centers.  Returns 0.0 if empty,
    requires start > len(gamma.values)."""
    tail = gamma.tail
    if tail is None:
        return 0.0
    last = tail.last_index_above(delta)
    if last < start:
        return 0.0
    count = last - start + 1
    # sum log((delta/c) * k**p) for k = start..last
    return count * math.log(delta / tail.c) + tail.p * (
        math.lgamma(last + 1) - math.lgamma(start)
    )


def _log_ball_prob(gamma: WeightSequence, x: SeqPoint, delta: float) -> float:
    """log mu(B^delta(x)); -inf when the ball has no mass."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    m = _trimmed_support(x)
    explicit_upto = max(len(gamma.values), m)
    total = 0.0
    for k in range(1, explicit_upto + 1):
        c = abs(x.coeffs[k - 1]) if k <= m else 0.0
        factor = _interval_prob(gamma.weight(k), c, delta)
        if factor == 0.0:
            return -math.inf
        if factor != 1.0:
            total += math.log(factor)
    total += _tail_log_product(gamma, explicit_upto + 1, delta)
    return total


def ball_prob_exact(gamma: WeightSequence, x: SeqPoint, delta: float) -> BallEstimate:
    """Exact prior probability of the sup-norm ball of radius delta
    around x, as a product of per-coordinate interval probabilities.

    Factors equal to one (all indices with gamma_k + |x_k| <= delta) are
    skipped; a single zero factor short-circuits to probability zero.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    m = _trimmed_support(x)
    explicit_upto = max(len(gamma.values), m)
    factors = []
    for k in range(1, explicit_upto + 1):
        c = abs(x.coeffs[k - 1]) if k <= m else 0.0
        factor = _interval_prob(gamma.weight(k), c, delta)
        if factor == 0.0:
            return BallEstimate(0.0, "exact_product")
        if factor != 1.0:
            factors.append(factor)
    tail_log = _tail_log_product(gamma, explicit_upto + 1, delta)
    if factors and min(factors) < _LOG_SPACE_CUTOFF:
        value = math.exp(sum(math.log(f) for f in factors) + tail_log)
    else:
        value = 1.0
        for f in factors:
            value *= f
        value *= math.exp(tail_log)
    return BallEstimate(min(value, 1.0), "exact_product")


def max_ball_prob(gamma: WeightSequence, delta: float) -> BallEstimate:
    """Maximal ball probability of radius delta, attained at the origin
    (and on all of E_gamma^delta).  Always strictly positive."""
    return ball_prob_exact(gamma, SeqPoint(()), delta)


def component_ratio(gamma_k: float, x_k: float, delta: float) -> float:
    """Ratio P(gamma_k xi in (x_k - delta, x_k + delta)) /
    P(gamma_k xi in (-delta, delta)) for a feasible coordinate
    (|x_k| <= gamma_k); equals 1 when gamma_k = 0.

    Piecewise in delta:
        1                                       delta <= gamma_k - |x_k|
        (delta + gamma_k - |x_k|) / (2 delta)   gamma_k - |x_k| < delta <= gamma_k
        (delta + gamma_k - |x_k|) / (2 gamma_k) gamma_k < delta < gamma_k + |x_k|
        1                                       delta >= gamma_k + |x_k|

    The ratio is bounded below by 1 - |x_k| / (2 gamma_k) for every
    delta, with equality at delta = gamma_k.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    t = abs(x_k)
    if t > gamma_k:
        raise DomainError(f"|x_k| = {t!r} exceeds gamma_k = {gamma_k!r}")
    if gamma_k == 0.0:
        return 1.0
    if delta <= gamma_k - t or delta >= gamma_k + t:
        return 1.0
    if delta <= gamma_k:
        return (delta + gamma_k - t) / (2.0 * delta)
    return (delta + gamma_k - t) / (2.0 * gamma_k)


def default_truncation(gamma: WeightSequence, x: SeqPoint, delta: float) -> int:
    """Truncation level for Monte Carlo membership tests: beyond it the
    tail weights are below delta / 4, so truncation can never flip a
    strict sup-norm comparison at radius delta."""
    n = max(len(gamma.values), len(x.coeffs), 1)
    return max(n, gamma.support_above(delta / 4.0))


def sample_prior(gamma: WeightSequence, trunc: int, rng: RngSpec) -> SeqPoint:
    """One draw of the series truncated at index ``trunc``: coefficients
    gamma_k * xi_k with xi_k iid uniform on [-1, 1].  The draw always
    lies in E_gamma."""
    if trunc < len(gamma.values):
        raise DomainError(
            f"trunc = {trunc} does not cover the {len(gamma.values)} explicit weights"
        )
    if trunc < 1:
        raise DomainError(f"trunc must be >= 1, got {trunc}")
    weights = gamma.weights_upto(trunc)
    xi = rng.generator().uniform(-1.0, 1.0, trunc)
    return SeqPoint.from_array(weights * xi)


def _mc_chunk_count(
    weights: np.ndarray, center: np.ndarray, delta: float, rng: RngSpec, idx: int, count: int
) -> int:
    gen = rng.generator(idx)
    draws = gen.uniform(-1.0, 1.0, (count, weights.size)) * weights
    return int(np.count_nonzero(np.max(np.abs(draws - center), axis=1) < delta))


def ball_prob_mc(
    gamma: WeightSequence,
    x: SeqPoint,
    delta: float,
    n: int,
    trunc: Optional[int] = None,
    rng: RngSpec = RngSpec(0),
    threads: int = 1,
) -> BallEstimate:
    """Monte Carlo estimate of the prior ball probability: the fraction
    of n truncated prior draws with sup|draw - x| < delta, with binomial
    standard error sqrt(p(1-p)/n).

    Work is split into fixed-size chunks, each drawing from its own
    child stream; the result is independent of the thread count.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if trunc is None:
        trunc = default_truncation(gamma, x, delta)
    dim = max(trunc, len(x.coeffs))
    weights = gamma.weights_upto(dim)
    weights[trunc:] = 0.0  # caller-fixed truncation: no draws beyond trunc
    center = x.as_array(dim)
    tasks = [(weights, center, delta, rng, idx, count) for idx, count in sample_chunks(n)]
    hits = sum(run_tasks(_mc_chunk_count, tasks, threads=threads))
    p_hat = hits / n
    return BallEstimate(
        value=p_hat,
        method="monte_carlo",
        std_error=math.sqrt(p_hat * (1.0 - p_hat) / n),
        n_samples=n,
    )


def classify_generalized_mode(x: SeqPoint, gamma: WeightSequence) -> bool:
    """Generalized modes of the prior are exactly the points of the
    feasible box, boundary included."""
    return in_E_gamma(x, gamma)


def strong_mode_diagnostic(
    x: SeqPoint, gamma: WeightSequence, deltas: Sequence[float]
) -> list[tuple[float, float]]:
    """The curve delta -> mu(B^delta(x)) / max_ball_prob(delta) on a
    decreasing radius schedule.

    The caller inspects whether the curve approaches 1 (evidence for a
    strong mode) or stays bounded away from it; no verdict is declared,
    since a limit cannot be certified from finitely many radii.  Points
    outside the feasible box are rejected: their curve is eventually
    identically zero and reporting it invites misreading.
    """
    check_decreasing(deltas)
    if not in_E_gamma(x, gamma):
        raise DomainError("point is outside E_gamma; its ratio curve vanishes eventually")
    out = []
    for delta in deltas:
        log_ratio = _log_ball_prob(gamma, x, delta) - _log_ball_prob(
            gamma, SeqPoint(()), delta
        )
        out.append((float(delta), math.exp(log_ratio)))
    return out
