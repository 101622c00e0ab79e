"""Weighted sequence space: feasible boxes and metric projections.

The ambient space is the space of real sequences converging to zero,
equipped with the sup norm.  A weight sequence ``gamma`` (non-negative,
tending to zero) defines the feasible box

    E_gamma       = {x : |x_k| <= gamma_k for all k},

its shrunken version for a margin ``delta > 0``

    E_gamma^delta = {x : |x_k| <= max(gamma_k - delta, 0) for all k},

and the sup-norm metric projection onto the shrunken box, which acts
componentwise as a clamp.  Infinite sequences are represented finitely:
an explicit list of leading weights plus an optional power-law decay
rule for the tail.  Points are finitely supported coefficient vectors
(coefficients beyond the stored length are zero).

All types are immutable after construction and all operations are pure,
so everything here is safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "PowerLawTail",
    "WeightSequence",
    "SeqPoint",
    "in_E_gamma",
    "in_E_gamma_delta",
    "project_delta",
    "box_project",
    "sup_norm",
]


def _check_finite(values: Sequence[float], what: str) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"{what} must be finite, got {v!r}")


@dataclass(frozen=True)
class PowerLawTail:
    """Analytic tail rule gamma_k = c * k**(-p) for indices beyond the
    explicit weights.  Requires c > 0 and p > 0, hence the tail is
    strictly decreasing and tends to zero."""

    c: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"tail coefficient c must be positive, got {self.c!r}")
        if not (math.isfinite(self.p) and self.p > 0):
            raise DomainError(f"tail exponent p must be positive, got {self.p!r}")

    def value_at(self, k: int) -> float:
        return self.c * float(k) ** (-self.p)

    def last_index_above(self, threshold: float) -> int:
        """Largest index k with c * k**(-p) > threshold (0 if none).

        c * k**(-p) > t  <=>  k < (c / t)**(1/p).
        """
        if threshold <= 0:
            raise DomainError("threshold must be positive to bound a power-law tail")
        if self.c <= threshold:
            # value_at(1) = c already <= threshold
            return 0
        bound = (self.c / threshold) ** (1.0 / self.p)
        k = int(math.ceil(bound)) - 1
        # guard against rounding on either side of the cutoff
        while k >= 1 and not self.value_at(k) > threshold:
            k -= 1
        while self.value_at(k + 1) > threshold:
            k += 1
        return k


@dataclass(frozen=True)
class WeightSequence:
    """Non-negative weights (gamma_1, ..., gamma_N) plus an optional
    power-law tail for k > N.

    Invariants enforced at construction:
      * every explicit value is finite and >= 0;
      * without a tail rule, gamma_k = 0 for all k > N;
      * with a tail rule, the rule's value at k = N + 1 must not exceed
        values[N-1] (monotone handoff).
    """

    values: tuple[float, ...]
    tail: Optional[PowerLawTail] = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        _check_finite(vals, "weights")
        for v in vals:
            if v < 0:
                raise DomainError(f"weights must be non-negative, got {v!r}")
        if self.tail is not None and vals:
            handoff = self.tail.value_at(len(vals) + 1)
            if handoff > vals[-1]:
                raise DomainError(
                    f"tail value {handoff!r} at index {len(vals) + 1} exceeds the "
                    f"last explicit weight {vals[-1]!r} (monotone handoff violated)"
                )

    def __len__(self) -> int:
        return len(self.values)

    def weight(self, k: int) -> float:
        """gamma_k for a 1-based index k."""
        if k < 1:
            raise DomainError(f"index must be >= 1, got {k}")
        if k <= len(self.values):
            return self.values[k - 1]
        if self.tail is not None:
            return self.tail.value_at(k)
        return 0.0

    def weights_upto(self, m: int) -> np.ndarray:
        """(gamma_1, ..., gamma_m) as an array, tail values included."""
        n = len(self.values)
        out = np.zeros(m)
        out[: min(n, m)] = self.values[: min(n, m)]
        if self.tail is not None and m > n:
            ks = np.arange(n + 1, m + 1, dtype=float)
            out[n:] = self.tail.c * ks ** (-self.tail.p)
        return out

    @property
    def max_weight(self) -> float:
        """sup_k gamma_k (the tail never exceeds the last explicit value)."""
        if self.values:
            return max(self.values)
        if self.tail is not None:
            return self.tail.value_at(1)
        return 0.0

    def support_above(self, threshold: float) -> int:
        """Largest index k with gamma_k > threshold (0 if none)."""
        if threshold <= 0:
            raise DomainError("threshold must be positive")
        last = 0
        for i, v in enumerate(self.values, start=1):
            if v > threshold:
                last = i
        if self.tail is not None:
            tail_last = self.tail.last_index_above(threshold)
            if tail_last > len(self.values):
                last = max(last, tail_last)
        return last

    def to_json(self) -> str:
        tail = None if self.tail is None else {"c": self.tail.c, "p": self.tail.p}
        return json.dumps({"values": list(self.values), "tail": tail})

    @classmethod
    def from_json(cls, text: str) -> "WeightSequence":
        obj = json.loads(text)
        tail = obj.get("tail")
        return cls(
            values=tuple(obj["values"]),
            tail=None if tail is None else PowerLawTail(c=tail["c"], p=tail["p"]),
        )


@dataclass(frozen=True)
class SeqPoint:
    """A point x = (x_1, ..., x_M) in the sequence space; coefficients
    beyond the stored length are zero.  The empty point is the origin."""

    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        cs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", cs)
        _check_finite(cs, "coefficients")

    def __len__(self) -> int:
        return len(self.coeffs)

    def as_array(self, length: Optional[int] = None) -> np.ndarray:
        """Coefficients as an array, zero-padded to ``length`` if given."""
        n = len(self.coeffs)
        m = n if length is None else max(length, n)
        out = np.zeros(m)
        out[:n] = self.coeffs
        return out

    @classmethod
    def from_array(cls, arr) -> "SeqPoint":
        return cls(tuple(float(v) for v in np.asarray(arr, dtype=float)))

    def to_json(self) -> str:
        return json.dumps({"coeffs": list(self.coeffs)})

    @classmethod
    def from_json(cls, text: str) -> "SeqPoint":
        return cls(tuple(json.loads(text)["coeffs"]))


def in_E_gamma(x: SeqPoint, gamma: WeightSequence) -> bool:
    """True iff |x_k| <= gamma_k for every k.  Comparisons are exact:
    the box boundary belongs to the feasible set."""
    return all(abs(c) <= gamma.weight(k) for k, c in enumerate(x.coeffs, start=1))


def in_E_gamma_delta(x: SeqPoint, gamma: WeightSequence, delta: float) -> bool:
    """True iff |x_k| <= max(gamma_k - delta, 0) for every k."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return all(
        abs(c) <= max(gamma.weight(k) - delta, 0.0)
        for k, c in enumerate(x.coeffs, start=1)
    )


def project_delta(x: SeqPoint, gamma: WeightSequence, delta: float) -> SeqPoint:
    """Sup-norm metric projection onto the shrunken box E_gamma^delta.

    Acts componentwise: coefficients with gamma_k < delta are zeroed,
    all others are clamped to [-(gamma_k - delta), gamma_k - delta].
    The result always satisfies ``in_E_gamma_delta``.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    out = []
    for k, c in enumerate(x.coeffs, start=1):
        bound = gamma.weight(k) - delta
        if bound < 0.0:
            out.append(0.0)
        else:
            out.append(min(max(c, -bound), bound))
    return SeqPoint(tuple(out))


def box_project(v: SeqPoint, gamma: WeightSequence) -> SeqPoint:
    """Componentwise clamp of v_k to [-gamma_k, gamma_k]; the delta -> 0
    limit of ``project_delta``.  The result satisfies ``in_E_gamma``."""
    out = []
    for k, c in enumerate(v.coeffs, start=1):
        bound = gamma.weight(k)
        out.append(min(max(c, -bound), bound))
    return SeqPoint(tuple(out))


def sup_norm(x: SeqPoint) -> float:
    """Maximum absolute coefficient (0 for the origin)."""
    if not x.coeffs:
        return 0.0
    return max(abs(c) for c in x.coeffs)
