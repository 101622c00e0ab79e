"""1-d density laboratory: exact ball probabilities, maximizing centers,
and the strong/generalized mode diagnostics on the bundled densities."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from genmap import (
    DomainError,
    PiecewiseDensity1D,
    ball_prob_1d,
    builtin_density,
    cluster_density,
    gaussian_density,
    generalized_mode_diagnostic,
    max_ball_prob_1d,
    mode_curve_rows,
    property_ratio_check,
    standard_density,
    strong_mode_ratio_curve,
)

RT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def staircase_integral(lo: float, hi: float, n_max: int = 120) -> float:
    """Exact integral of max(1 - g(u), 0) over (lo, hi) for the dyadic
    staircase g(u) = (3/4) 2^-n on 2^-(n+1) < |u| <= 2^-n, accumulated
    annulus by annulus (independent of the breakpoint representation)."""

    def one_side(a: float, b: float) -> float:  # 0 <= a <= b
        total = max(0.0, min(b, 2.0**-n_max) - a)  # innermost plateau, value 1
        for n in range(0, n_max):
            left, right = 2.0 ** -(n + 1), 2.0**-n
            width = max(0.0, min(b, right) - max(a, left))
            total += width * (1.0 - 0.75 * 2.0**-n)
        return total

    lo_c, hi_c = max(lo, -1.0), min(hi, 1.0)  # support of 1 - g is |u| <= 1
    if hi_c <= lo_c:
        return 0.0
    neg = one_side(max(0.0, -hi_c), -lo_c) if lo_c < 0 else 0.0
    pos = one_side(max(0.0, lo_c), hi_c) if hi_c > 0 else 0.0
    return neg + pos


def cluster_ball_unnormalized(center: float, delta: float) -> float:
    """Exact mass of (center - delta, center + delta) under the analytic
    two-bump density, before normalization."""
    lo, hi = center - delta, center + delta
    right = staircase_integral(lo - 1.0, hi - 1.0)
    # left bump: substitute u = (x + 1)/sqrt(2); the integrand is
    # 1 - sqrt(2) g(u) on |u| <= 1/2, which per annulus n >= 1 has value
    # 1 - (3/4) sqrt(2) 2^-n
    def left_side(a: float, b: float, n_max: int = 120) -> float:
        total = max(0.0, min(b, RT2 * 2.0**-n_max) - a)
        for n in range(1, n_max):
            left_b, right_b = RT2 * 2.0 ** -(n + 1), RT2 * 2.0**-n
            width = max(0.0, min(b, right_b) - max(a, left_b))
            total += width * (1.0 - 0.75 * RT2 * 2.0**-n)
        return total

    lo_u, hi_u = max(lo + 1.0, -RT2 / 2.0), min(hi + 1.0, RT2 / 2.0)
    left = 0.0
    if hi_u > lo_u:
        if lo_u < 0:
            left += left_side(max(0.0, -hi_u), -lo_u)
        if hi_u > 0:
            left += left_side(max(0.0, lo_u), hi_u)
    return right + left


def mass_at_plus_one(delta: float) -> float:
    """Closed form for the unnormalized ball mass centered at +1."""
    n = math.floor(-math.log2(delta))
    if not 2.0 ** -(n + 1) < delta <= 2.0**-n:
        n += 1 if delta <= 2.0 ** -(n + 1) else -1
    return 2.0 * delta - 1.5 * 2.0**-n * delta + 0.5 * 4.0**-n


def mass_at_minus_one(delta: float) -> float:
    """Closed form for the unnormalized ball mass centered at -1."""
    dp = delta / RT2
    n = math.floor(-math.log2(dp))
    if not 2.0 ** -(n + 1) < dp <= 2.0**-n:
        n += 1 if dp <= 2.0 ** -(n + 1) else -1
    return 2.0 * delta - 3.0 / RT2 * 2.0**-n * delta + 4.0**-n


# ---------------------------------------------------------------------------
# construction and exactness
# ---------------------------------------------------------------------------


class TestConstruction:
    def test_rejects_cubic_pieces(self):
        with pytest.raises(DomainError):
            PiecewiseDensity1D((0.0, 1.0), ((1.0, 0.0, 0.0, 1.0),))

    def test_rejects_negative_density(self):
        with pytest.raises(DomainError):
            PiecewiseDensity1D((0.0, 2.0), ((1.0, -1.0),))  # dips to -1 at x=2

    def test_rejects_unordered_breakpoints(self):
        with pytest.raises(DomainError):
            PiecewiseDensity1D((0.0, 0.0), ((1.0,),))

    def test_normalization_value(self):
        d = standard_density()
        assert d.normalization == pytest.approx(0.5, rel=1e-15)

    def test_json_roundtrip(self):
        d = standard_density()
        again = PiecewiseDensity1D.from_json(d.to_json())
        assert again == d


class TestBallProb1D:
    def test_standard_density_value(self):
        # integral of (1 - x)/Z over (-0.1, 0.1) with Z = 1/2
        d = standard_density()
        assert ball_prob_1d(d, 0.0, 0.1) == pytest.approx(0.19, rel=1e-14)

    def test_full_support_is_one(self):
        for d in (standard_density(), gaussian_density(), cluster_density()):
            assert ball_prob_1d(d, 0.0, 50.0) == pytest.approx(1.0, rel=1e-14)

    def test_far_outside_is_zero(self):
        assert ball_prob_1d(standard_density(), 10.0, 0.5) == 0.0

    def test_quadrature_agreement_smooth_fixtures(self):
        rng = np.random.default_rng(41)
        for d in (standard_density(), gaussian_density()):
            bps = np.asarray(d.breakpoints)
            for _ in range(25):
                c = float(rng.uniform(bps[0] - 0.3, bps[-1] + 0.3))
                delta = float(rng.uniform(0.01, 1.0))
                pts = bps[(bps > c - delta) & (bps < c + delta)]
                val, _ = quad(
                    lambda t: d.density_at(t), c - delta, c + delta,
                    points=pts, limit=200, epsabs=1e-13, epsrel=1e-13,
                )
                assert ball_prob_1d(d, c, delta) == pytest.approx(val, abs=1e-10)

    def test_cluster_matches_analytic_staircase(self):
        d = cluster_density()
        rng = np.random.default_rng(42)
        for _ in range(50):
            c = float(rng.uniform(-2.0, 2.5))
            delta = float(rng.uniform(1e-4, 1.2))
            expected = cluster_ball_unnormalized(c, delta) / d.normalization
            assert ball_prob_1d(d, c, delta) == pytest.approx(expected, rel=1e-11, abs=1e-14)

    def test_cluster_center_masses_match_closed_forms(self):
        # the closed forms hold while the ball stays inside one staircase
        # bump, i.e. for radii up to half the bump scale
        d = cluster_density()
        rng = np.random.default_rng(43)
        for _ in range(40):
            delta = float(2.0 ** rng.uniform(-10, -1))
            assert ball_prob_1d(d, 1.0, delta) * d.normalization == pytest.approx(
                mass_at_plus_one(delta), rel=1e-12
            )
            assert ball_prob_1d(d, -1.0, delta) * d.normalization == pytest.approx(
                mass_at_minus_one(delta), rel=1e-12
            )


# ---------------------------------------------------------------------------
# maximizing centers
# ---------------------------------------------------------------------------


class TestMaxBallProb1D:
    def test_standard_argmax_at_delta(self):
        d = standard_density()
        for delta in (0.1, 0.03, 0.007):
            center, prob = max_ball_prob_1d(d, delta)
            assert center == pytest.approx(delta, abs=1e-6)
            assert prob == pytest.approx(4.0 * delta * (1.0 - delta), rel=1e-9)

    def test_gaussian_argmax_at_mean(self):
        d = gaussian_density()
        span = d.breakpoints[-1] - d.breakpoints[0]
        for delta in (0.5, 0.1, 0.02):
            center, _ = max_ball_prob_1d(d, delta, grid=4097)
            resolution = (span + 2 * delta) / 4096
            assert abs(center) <= resolution

    def test_cluster_side_alternation(self):
        # which bump wins is decided by the closed-form masses; the
        # within-octave crossings sit near fractions 0.569 and 0.805.
        # Octaves are tested while the inter-bump margin stays above the
        # grid search's resolution error.
        d = cluster_density()
        for frac, side in [(0.52, +1), (0.62, -1), (0.78, -1), (0.9, +1)]:
            for n in (2, 3, 4, 5, 6):
                delta = frac * 2.0**-n
                assert (mass_at_plus_one(delta) > mass_at_minus_one(delta)) == (side > 0)
                center, _ = max_ball_prob_1d(d, delta)
                assert (center > 0) == (side > 0)
                assert abs(center - side) <= RT2 * 2.0**-n

    def test_ties_break_toward_smaller_center(self):
        # two congruent plateaus: balls centered at 0.5 and 2.5 carry the
        # same mass, the reported argmax is the smaller one
        d = PiecewiseDensity1D((0.0, 1.0, 2.0, 3.0), ((1.0,), (0.0,), (1.0,)))
        center, _ = max_ball_prob_1d(d, 0.5, grid=1201)
        assert center <= 0.5 + 1e-9

    def test_rejects_small_grid(self):
        with pytest.raises(DomainError):
            max_ball_prob_1d(standard_density(), 0.1, grid=1)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


class TestStrongModeRatioCurve:
    def test_standard_levels_off_at_half(self):
        d = standard_density()
        deltas = [0.1 * 0.5**j for j in range(12)]
        curve = strong_mode_ratio_curve(d, 0.0, deltas)
        assert abs(curve[-1][1] - 0.5) <= 0.02
        # exact ratio is (1 - delta/2) / (2 (1 - delta))
        for delta, ratio in curve:
            expected = (1.0 - 0.5 * delta) / (2.0 * (1.0 - delta))
            assert ratio == pytest.approx(expected, rel=1e-6)

    def test_maximizer_of_continuous_density(self):
        d = gaussian_density()
        curve = strong_mode_ratio_curve(d, 0.0, [0.4, 0.1, 0.02])
        for _, ratio in curve:
            assert ratio >= 1.0 - 1e-9

    def test_cluster_ratio_oscillates(self):
        d = cluster_density()
        deltas = [1.1**-n for n in range(10, 60)]
        curve = strong_mode_ratio_curve(d, 1.0, deltas)
        at_max, below = 0, 0
        for delta, ratio in curve:
            expected = min(
                1.0, mass_at_plus_one(delta) / mass_at_minus_one(delta)
            )
            assert ratio == pytest.approx(expected, rel=1e-6)
            if ratio >= 1.0 - 1e-9:
                at_max += 1
            if ratio < 0.9995:
                below += 1
        assert at_max >= 10 and below >= 10


class TestGeneralizedModeDiagnostic:
    def test_standard_at_discontinuity(self):
        d = standard_density()
        rows = generalized_mode_diagnostic(d, 0.0, [0.05, 0.01, 0.002])
        for delta, w, ratio in rows:
            assert w == pytest.approx(delta, abs=1e-6)
            assert ratio >= 1.0 - 1e-9

    def test_unimodal_maximizer(self):
        d = gaussian_density()
        rows = generalized_mode_diagnostic(d, 0.0, [0.3, 0.05, 0.01])
        for delta, w, ratio in rows:
            assert abs(w) <= math.sqrt(delta)
            assert ratio >= 1.0 - 1e-9

    def test_interior_non_maximal_point(self):
        # at 0.5 the density is half its peak value, and the shrinking
        # window pins the achievable ratio to that fraction
        d = standard_density()
        rows = generalized_mode_diagnostic(d, 0.5, [1e-4, 1e-5, 1e-6])
        _, w, ratio = rows[-1]
        assert abs(w - 0.5) <= 1e-3
        assert ratio == pytest.approx(0.5, abs=0.01)


class TestPropertyRatioCheck:
    def test_standard_fails_strong_condition(self):
        d = standard_density()
        rows = property_ratio_check(d, 0.0, [0.01 * 0.5**j for j in range(8)])
        assert rows[-1][1] == pytest.approx(0.5, abs=0.01)

    def test_continuous_maximizer_passes(self):
        d = gaussian_density()
        rows = property_ratio_check(d, 0.0, [0.3, 0.05, 0.01])
        for _, ratio in rows:
            assert ratio == pytest.approx(1.0, abs=1e-6)

    def test_flat_density_interior_point(self):
        d = PiecewiseDensity1D((0.0, 1.0), ((1.0,),))
        rows = property_ratio_check(d, 0.5, [0.05, 0.02, 0.01])
        for _, ratio in rows:
            assert ratio == pytest.approx(1.0, abs=1e-12)


def test_mode_curve_rows_consistent_with_parts():
    d = standard_density()
    deltas = [0.1, 0.05]
    rows = mode_curve_rows(d, 0.0, deltas)
    curve = dict(strong_mode_ratio_curve(d, 0.0, deltas))
    ratio_w = dict(property_ratio_check(d, 0.0, deltas))
    for delta, argmax_c, ratio, ratio_to_w in rows:
        assert ratio == pytest.approx(curve[delta], rel=1e-12)
        assert ratio_to_w == pytest.approx(ratio_w[delta], rel=1e-12)
        assert argmax_c == pytest.approx(delta, abs=1e-6)


def test_builtin_density_names():
    assert builtin_density("standard") == standard_density()
    with pytest.raises(DomainError):
        builtin_density("nope")
