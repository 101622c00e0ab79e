"""One-dimensional laboratory for strong and generalized modes.

Works with probability densities that are piecewise polynomial of
degree at most two, so every ball probability is an exact difference of
closed-form antiderivatives.  On top of that it provides

  * the maximal ball probability over all centers (grid search with a
    golden-section polish),
  * the strong-mode ratio curve delta -> mu(B^delta(x)) / M^delta,
  * a generalized-mode diagnostic that searches for maximizing centers
    w_delta inside a shrinking window around the candidate point, and
  * the companion curve mu(B^delta(x)) / mu(B^delta(w_delta)), whose
    convergence to 1 is numerical evidence that the candidate is a
    strong and not merely a generalized mode.

Three densities are bundled: a triangular density whose peak sits at a
jump of the density ("standard"), a two-bump staircase density whose
maximizing ball centers keep alternating between the bumps ("cluster"),
and a piecewise-quadratic fit of the standard normal ("gaussian").

The shrinking search window has radius sqrt(delta).  The diagnostic only
requires the centers to converge, with no rate attached, so the window
must shrink slower than delta itself or legitimate approximating
families (e.g. w_delta = delta for the standard density) would fall
outside it.  A different window could classify borderline synthetic
densities differently; the choice is a tool convention, not a theorem.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .schedules import check_decreasing

__all__ = [
    "PiecewiseDensity1D",
    "ball_prob_1d",
    "max_ball_prob_1d",
    "strong_mode_ratio_curve",
    "generalized_mode_diagnostic",
    "property_ratio_check",
    "mode_curve_rows",
    "standard_density",
    "cluster_density",
    "gaussian_density",
    "builtin_density",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PiecewiseDensity1D:
    """Density that is polynomial of degree <= 2 on each interval
    between consecutive breakpoints and zero outside them.

    ``pieces[j]`` holds ascending-power coefficients (a0[, a1[, a2]])
    of the unnormalized density on (breakpoints[j], breakpoints[j+1]).
    The normalization constant (integral of the unnormalized density)
    is computed at construction; the normalized density integrates to 1
    up to one rounding of the stored sum.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        pcs = tuple(tuple(float(c) for c in p) for p in self.pieces)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)
        if len(bps) < 2:
            raise DomainError("need at least two breakpoints")
        if len(pcs) != len(bps) - 1:
            raise DomainError(
                f"{len(bps)} breakpoints require {len(bps) - 1} pieces, got {len(pcs)}"
            )
        for a, b in zip(bps, bps[1:]):
            if not b > a:
                raise DomainError("breakpoints must be strictly increasing")
        for p in pcs:
            if not 1 <= len(p) <= 3:
                raise DomainError(f"pieces must have degree <= 2, got coefficients {p!r}")
        # dense coefficient arrays for vectorized evaluation
        m = len(pcs)
        coeff = np.zeros((3, m))
        for j, p in enumerate(pcs):
            coeff[: len(p), j] = p
        object.__setattr__(self, "_coeff", coeff)
        self._check_nonnegative()
        bp = np.asarray(bps)
        seg = self._antideriv(bp[1:], np.arange(m)) - self._antideriv(bp[:-1], np.arange(m))
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        object.__setattr__(self, "_cum", cum)
        total = float(cum[-1])
        if not total > 0:
            raise DomainError("density must have positive total mass")
        object.__setattr__(self, "normalization", total)

    def _check_nonnegative(self):
        for j, (lo, hi) in enumerate(zip(self.breakpoints, self.breakpoints[1:])):
            a0, a1, a2 = self._coeff[:, j]
            candidates = [lo, hi]
            if a2 != 0.0:
                vertex = -a1 / (2.0 * a2)
                if lo < vertex < hi:
                    candidates.append(vertex)
            for t in candidates:
                if a0 + a1 * t + a2 * t * t < -1e-12:
                    raise DomainError(f"density negative on piece {j} near t = {t!r}")

    def _antideriv(self, t, j):
        """Antiderivative of piece(s) j evaluated at t (vectorized)."""
        a0 = self._coeff[0, j]
        a1 = self._coeff[1, j]
        a2 = self._coeff[2, j]
        return t * (a0 + t * (a1 / 2.0 + t * a2 / 3.0))

    def _cdf_unnormalized(self, t):
        """Integral of the unnormalized density from the left end to t."""
        t = np.asarray(t, dtype=float)
        bp = np.asarray(self.breakpoints)
        j = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, len(self.pieces) - 1)
        inner = self._cum[j] + self._antideriv(t, j) - self._antideriv(bp[j], j)
        return np.where(t <= bp[0], 0.0, np.where(t >= bp[-1], self._cum[-1], inner))

    def density_at(self, t: float) -> float:
        """Normalized density value (0 outside the support; at interior
        breakpoints the right-hand piece is used)."""
        bp = self.breakpoints
        if t < bp[0] or t > bp[-1]:
            return 0.0
        j = min(int(np.searchsorted(bp, t, side="right")) - 1, len(self.pieces) - 1)
        j = max(j, 0)
        a0, a1, a2 = self._coeff[:, j]
        return (a0 + a1 * t + a2 * t * t) / self.normalization

    def ball_prob_many(self, centers, delta: float) -> np.ndarray:
        centers = np.asarray(centers, dtype=float)
        hi = self._cdf_unnormalized(centers + delta)
        lo = self._cdf_unnormalized(centers - delta)
        return (hi - lo) / self.normalization

    def to_json(self) -> str:
        return json.dumps(
            {"breakpoints": list(self.breakpoints), "pieces": [list(p) for p in self.pieces]}
        )

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseDensity1D":
        obj = json.loads(text)
        return cls(
            breakpoints=tuple(obj["breakpoints"]),
            pieces=tuple(tuple(p) for p in obj["pieces"]),
        )


def ball_prob_1d(density: PiecewiseDensity1D, center: float, delta: float) -> float:
    """Exact probability of (center - delta, center + delta) under the
    normalized density, via the piecewise antiderivatives."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    return float(density.ball_prob_many(np.array([center]), delta)[0])


def _golden_polish(f, lo: float, hi: float, iters: int = 70) -> tuple[float, float]:
    """Golden-section maximization of f on [lo, hi]; deterministic."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 >= f2:  # keep the left bracket on ties: smaller centers win
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    x = x1 if f1 >= f2 else x2
    return x, f(x)


def _max_over_range(
    density: PiecewiseDensity1D, delta: float, lo: float, hi: float, grid: int
) -> tuple[float, float]:
    """Grid search over centers in [lo, hi] refined by a golden-section
    polish around the best grid cell; ties go to the smallest center."""
    if grid < 2:
        raise DomainError(f"grid must be >= 2, got {grid}")
    centers = np.linspace(lo, hi, grid)
    vals = density.ball_prob_many(centers, delta)
    i = int(np.argmax(vals))  # first occurrence = smallest center
    left = centers[max(i - 1, 0)]
    right = centers[min(i + 1, grid - 1)]
    x, fx = _golden_polish(lambda c: ball_prob_1d(density, c, delta), left, right)
    best_c, best_v = float(centers[i]), float(vals[i])
    if fx > best_v or (fx == best_v and x < best_c):
        best_c, best_v = float(x), float(fx)
    return best_c, best_v


def max_ball_prob_1d(
    density: PiecewiseDensity1D, delta: float, grid: int = 4097
) -> tuple[float, float]:
    """(argmax center, probability) of the radius-delta ball over all
    centers.  Centers up to delta outside the support are considered,
    since such balls still overlap it."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    lo = density.breakpoints[0] - delta
    hi = density.breakpoints[-1] + delta
    return _max_over_range(density, delta, lo, hi, grid)


def strong_mode_ratio_curve(
    density: PiecewiseDensity1D,
    x_hat: float,
    deltas: Sequence[float],
    grid: int = 4097,
) -> list[tuple[float, float]]:
    """delta -> mu(B^delta(x_hat)) / M^delta on a decreasing schedule."""
    check_decreasing(deltas)
    out = []
    for delta in deltas:
        _, m_delta = max_ball_prob_1d(density, delta, grid)
        out.append((float(delta), ball_prob_1d(density, x_hat, delta) / m_delta))
    return out


def generalized_mode_diagnostic(
    density: PiecewiseDensity1D,
    x_hat: float,
    deltas: Sequence[float],
    grid: int = 4097,
) -> list[tuple[float, float, float]]:
    """For each delta, search for the best center w_delta within the
    shrinking window [x_hat - sqrt(delta), x_hat + sqrt(delta)] and
    report (delta, w_delta, mu(B^delta(w_delta)) / M^delta).

    Evidence that x_hat is a generalized mode is w_delta -> x_hat with
    ratio -> 1 along the schedule; the caller draws that conclusion.
    """
    check_decreasing(deltas)
    out = []
    for delta in deltas:
        r = math.sqrt(delta)
        w, w_val = _max_over_range(density, delta, x_hat - r, x_hat + r, grid)
        _, m_delta = max_ball_prob_1d(density, delta, grid)
        out.append((float(delta), w, w_val / m_delta))
    return out


def property_ratio_check(
    density: PiecewiseDensity1D,
    x_hat: float,
    deltas: Sequence[float],
    grid: int = 4097,
) -> list[tuple[float, float]]:
    """delta -> mu(B^delta(x_hat)) / mu(B^delta(w_delta)) with w_delta
    from the shrinking-window search of ``generalized_mode_diagnostic``.

    A generalized mode for which this curve tends to 1 passes the
    fixed-center-versus-moving-center comparison that separates strong
    modes from merely generalized ones.
    """
    check_decreasing(deltas)
    out = []
    for delta in deltas:
        r = math.sqrt(delta)
        w, _ = _max_over_range(density, delta, x_hat - r, x_hat + r, grid)
        ratio = ball_prob_1d(density, x_hat, delta) / ball_prob_1d(density, w, delta)
        out.append((float(delta), ratio))
    return out


def mode_curve_rows(
    density: PiecewiseDensity1D,
    x_hat: float,
    deltas: Sequence[float],
    grid: int = 4097,
) -> list[tuple[float, float, float, float]]:
    """Combined diagnostic rows (delta, argmax, ratio, ratio_to_w) with
    one global and one windowed maximization per radius:

      argmax     global maximizing ball center,
      ratio      mu(B^delta(x_hat)) / M^delta,
      ratio_to_w mu(B^delta(x_hat)) / mu(B^delta(w_delta)), w_delta from
                 the shrinking window around x_hat.
    """
    check_decreasing(deltas)
    out = []
    for delta in deltas:
        argmax_c, m_delta = max_ball_prob_1d(density, delta, grid)
        at_x = ball_prob_1d(density, x_hat, delta)
        r = math.sqrt(delta)
        w, _ = _max_over_range(density, delta, x_hat - r, x_hat + r, grid)
        at_w = ball_prob_1d(density, w, delta)
        out.append((float(delta), argmax_c, at_x / m_delta, at_x / at_w))
    return out


# ---------------------------------------------------------------------------
# bundled densities
# ---------------------------------------------------------------------------


def standard_density() -> PiecewiseDensity1D:
    """Triangular density 1 - x on [0, 1] (normalized), whose maximum
    sits at the jump discontinuity at 0: the best radius-delta ball is
    centered at delta, and the ratio curve of the point 0 itself levels
    off at 1/2."""
    return PiecewiseDensity1D(breakpoints=(0.0, 1.0), pieces=((1.0, -1.0),))


def cluster_density(levels: int = 45) -> PiecewiseDensity1D:
    """Two-bump staircase density whose maximizing ball centers keep
    alternating between the bumps at -1 and +1 as the radius shrinks.

    Around +1 the unnormalized density takes the value 1 - (3/4) * 2^-n
    on the dyadic annulus 2^-(n+1) < |x - 1| <= 2^-n; around -1 the same
    staircase is compressed by sqrt(2):  1 - (3/4) * sqrt(2) * 2^-n on
    sqrt(2) * 2^-(n+1) < |x + 1| <= sqrt(2) * 2^-n.  Negative staircase
    values are cut off, which bounds the bump supports.  The staircases
    are truncated after ``levels`` dyadic annuli; the innermost plateau
    takes the limiting value 1.
    """
    if levels < 2:
        raise DomainError("need at least two staircase levels")
    rt2 = math.sqrt(2.0)
    bps: list[float] = []
    vals: list[float] = []

    def add(bp: float, value_after: float):
        bps.append(bp)
        vals.append(value_after)

    # left bump around -1 (positive staircase values need n >= 1)
    for n in range(1, levels):
        add(-1.0 - rt2 * 2.0 ** -n, 1.0 - 0.75 * rt2 * 2.0 ** -n)
    add(-1.0 - rt2 * 2.0 ** -levels, 1.0)  # innermost plateau
    for n in range(levels - 1, 0, -1):
        add(-1.0 + rt2 * 2.0 ** -(n + 1), 1.0 - 0.75 * rt2 * 2.0 ** -n)
    add(-1.0 + rt2 * 0.5, 0.0)  # gap between the bumps
    # right bump around +1 (value positive from n = 0 on)
    for n in range(0, levels):
        add(1.0 - 2.0 ** -n, 1.0 - 0.75 * 2.0 ** -n)
    add(1.0 - 2.0 ** -levels, 1.0)  # innermost plateau
    for n in range(levels - 1, -1, -1):
        add(1.0 + 2.0 ** -(n + 1), 1.0 - 0.75 * 2.0 ** -n)
    bps.append(2.0)  # right edge of the support

    return PiecewiseDensity1D(breakpoints=tuple(bps), pieces=tuple((v,) for v in vals))


def gaussian_density(half_width: float = 4.0, intervals: int = 64) -> PiecewiseDensity1D:
    """Piecewise-quadratic interpolation of exp(-x^2/2) on the symmetric
    window [-half_width, half_width].  Symmetric and unimodal, so the
    maximizing ball center stays at 0 for every radius."""
    if intervals < 2:
        raise DomainError("need at least two intervals")
    nodes = np.linspace(-half_width, half_width, intervals + 1)
    pieces = []
    for lo, hi in zip(nodes, nodes[1:]):
        xs = np.array([lo, 0.5 * (lo + hi), hi])
        ys = np.exp(-0.5 * xs**2)
        coeffs = np.polynomial.polynomial.polyfit(xs, ys, 2)
        pieces.append(tuple(float(c) for c in coeffs))
    return PiecewiseDensity1D(breakpoints=tuple(float(t) for t in nodes), pieces=tuple(pieces))


_BUILTIN_DENSITIES = {
    "standard": standard_density,
    "cluster": cluster_density,
    "gaussian": gaussian_density,
}


def builtin_density(name: str) -> PiecewiseDensity1D:
    try:
        factory = _BUILTIN_DENSITIES[name]
    except KeyError:
        raise DomainError(
            f"unknown density {name!r}; available: {sorted(_BUILTIN_DENSITIES)}"
        ) from None
    return factory()
