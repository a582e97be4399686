"""Warping-profile tests: bump function, cumulative mass, ramp, grid checks.

Regression constants below are frozen from an independent quadrature oracle
(composite Gauss-Legendre with compensated summation, re-run in-test) and
from dense brute-force scans at a 1e-6 grid; the adaptive-quadrature values
in the package must agree with them independently.
"""

import math

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize_scalar

from fatflat import profiles
from fatflat.profiles import BumpSpec, WarpingProfile

from conftest import assert_close

# total bump mass, frozen from gauss_total_mass(k) (10^4 panels, 12 nodes);
# bitwise-identical to a 50-digit tanh-sinh quadrature rounded to double
FROZEN_TOTAL_MASS = {
    1.0: 0.4439938161680794,
    2.0: 0.8879876323361588,
    18.0: 7.99188869102543,
    19.0: 8.43588250719351,
}

# minimum of (ramp'' + ramp) for k=1 on np.arange(1.0, 3.0, 1e-6),
# and its parabolic refinement (minimize_scalar, xatol 1e-12)
UNIT_RAMP_MIN_GRID = -0.8124639048799284
UNIT_RAMP_ARGMIN_GRID = 2.756643999855487
UNIT_RAMP_MIN_REFINED = -0.8124639048848018
UNIT_RAMP_ARGMIN_REFINED = 2.7566436111799684
# worst value reported by verify_profile(k=1) on grid [0, 20], step 1e-4
UNIT_RAMP_MIN_COARSE = -0.8124638435465542


def gauss_total_mass(k: float, panels: int = 10_000, nodes: int = 12) -> float:
    """Independent oracle: composite fixed-order quadrature of the bump."""
    x, w = leggauss(nodes)
    edges = np.linspace(-k, k, panels + 1)
    terms = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        pts = mid + half * x
        vals = np.exp(-k * k / (k * k - pts * pts))
        terms.extend((half * w * vals).tolist())
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# bump function
# ---------------------------------------------------------------------------

class TestBumpFunction:
    def test_center_value(self):
        assert bump18(0.0) == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_support_boundary_is_zero(self):
        assert bump18(18.0) == 0.0
        assert bump18(-18.0) == 0.0
        assert bump18(18.0001) == 0.0
        assert bump18(-50.0) == 0.0

    def test_interior_value_two_thirds_out(self):
        # exponent -324/(324-81) = -4/3 exactly
        assert bump18(9.0) == pytest.approx(math.exp(-4.0 / 3.0), rel=1e-15)

    def test_even_symmetry(self):
        for x in (0.3, 5.0, 11.7, 17.9):
            assert bump18(x) == bump18(-x)

    def test_derivative_matches_finite_difference(self):
        spec = BumpSpec(18.0)
        h = 1e-6
        for x in (-15.0, -6.0, 0.5, 7.0, 13.0, 17.0):
            fd = (profiles.bump_f(spec, x + h)
                  - profiles.bump_f(spec, x - h)) / (2 * h)
            an = profiles.bump_f_prime(spec, x)
            assert an == pytest.approx(fd, rel=1e-7, abs=1e-12)

    def test_derivative_zero_outside_support(self):
        spec = BumpSpec(18.0)
        assert profiles.bump_f_prime(spec, 18.0) == 0.0
        assert profiles.bump_f_prime(spec, 25.0) == 0.0

    def test_vectorized_matches_scalar(self):
        spec = BumpSpec(19.0)
        xs = np.linspace(-20.0, 20.0, 401)
        vec = profiles.bump_f_many(spec, xs)
        for x, v in zip(xs, vec):
            assert v == pytest.approx(profiles.bump_f(spec, float(x)),
                                      rel=1e-15)

    def test_width_below_one_rejected(self):
        with pytest.raises(ValueError):
            BumpSpec(0.5)

    def test_nonpositive_tolerance_rejected(self):
        with pytest.raises(ValueError):
            BumpSpec(2.0, quadrature_tol=0.0)


def bump18(x: float) -> float:
    return profiles.bump_f(BumpSpec(18.0), x)


# ---------------------------------------------------------------------------
# cumulative mass
# ---------------------------------------------------------------------------

class TestCumulativeMass:
    def test_zero_below_support(self):
        spec = BumpSpec(18.0)
        assert profiles.bump_integral_F(spec, -18.0) == 0.0
        assert profiles.bump_integral_F(spec, -30.0) == 0.0

    def test_half_mass_at_center(self):
        spec = BumpSpec(18.0)
        total = profiles.bump_integral_F(spec, 18.0)
        half = profiles.bump_integral_F(spec, 0.0)
        assert half == pytest.approx(total / 2.0, abs=1e-11)

    @pytest.mark.parametrize("k", sorted(FROZEN_TOTAL_MASS))
    def test_total_mass_frozen(self, k):
        spec = BumpSpec(k)
        assert profiles.bump_integral_F(spec, k) == pytest.approx(
            FROZEN_TOTAL_MASS[k], abs=5e-12)

    @pytest.mark.parametrize("k", [1.0, 18.0])
    def test_total_mass_oracle_rerun(self, k):
        assert gauss_total_mass(k) == pytest.approx(
            FROZEN_TOTAL_MASS[k], abs=1e-14)

    @pytest.mark.parametrize("k", [2.0, 18.0, 19.0])
    def test_total_mass_scales_linearly_in_width(self, k):
        # substituting s = k*u maps the width-k bump onto the width-1 bump
        assert FROZEN_TOTAL_MASS[k] == pytest.approx(
            k * FROZEN_TOTAL_MASS[1.0], rel=1e-12)

    def test_constant_above_support(self):
        spec = BumpSpec(18.0)
        total = profiles.bump_integral_F(spec, 18.0)
        assert profiles.bump_integral_F(spec, 25.0) == total
        assert profiles.bump_integral_F(spec, 1e6) == total

    def test_nondecreasing(self):
        spec = BumpSpec(2.0)
        xs = np.linspace(-2.5, 2.5, 301)
        vals = [profiles.bump_integral_F(spec, float(x)) for x in xs]
        for lo, hi in zip(vals[:-1], vals[1:]):
            assert lo <= hi + 1e-12

    def test_fast_table_matches_adaptive(self):
        spec = BumpSpec(19.0)
        for x in (-18.0, -7.3, 0.0, 4.1, 12.9, 18.999):
            table = profiles._F_fast(19.0, x)
            adaptive = profiles.bump_integral_F(spec, x)
            assert table == pytest.approx(adaptive, abs=5e-12)

    def test_unreachable_tolerance_raises(self):
        spec = BumpSpec(3.0, quadrature_tol=1e-30)
        with pytest.raises(profiles.QuadratureError):
            profiles.bump_integral_F(spec, 1.0)

    def test_nonfinite_endpoint_rejected(self):
        with pytest.raises(ValueError):
            profiles.bump_integral_F(BumpSpec(2.0), float("nan"))


# ---------------------------------------------------------------------------
# ramp
# ---------------------------------------------------------------------------

class TestRamp:
    def test_zero_before_onset(self):
        spec = BumpSpec(18.0)
        assert profiles.rho(spec, 0.05) == (0.0, 0.0, 0.0)
        assert profiles.rho(spec, 1.0 / 18.0) == (0.0, 0.0, 0.0)
        assert profiles.rho(spec, 0.0) == (0.0, 0.0, 0.0)

    def test_half_at_midpoint(self):
        spec = BumpSpec(18.0)
        value, _, _ = profiles.rho(spec, 18.0 + 1.0 / 18.0)
        assert value == pytest.approx(0.5, abs=1e-12)

    def test_one_after_completion(self):
        spec = BumpSpec(18.0)
        assert profiles.rho(spec, 40.0) == (1.0, 0.0, 0.0)
        assert profiles.rho(spec, 2 * 18.0 + 1.0 / 18.0) == (1.0, 0.0, 0.0)

    def test_range_and_monotonicity(self):
        spec = BumpSpec(19.0)
        rs = np.linspace(0.0, 45.0, 4001)
        value, slope, _ = profiles.rho_many(spec, rs)
        assert np.all(value >= 0.0)
        assert np.all(value <= 1.0)
        assert np.all(np.diff(value) >= -1e-15)
        assert np.all(slope >= 0.0)

    def test_derivatives_match_finite_differences(self):
        spec = BumpSpec(19.0)
        h = 1e-5
        for r in np.linspace(0.2, 40.0, 57):
            v_m, d_m, _ = profiles.rho(spec, float(r) - h)
            v_p, d_p, _ = profiles.rho(spec, float(r) + h)
            _, d, dd = profiles.rho(spec, float(r))
            assert d == pytest.approx((v_p - v_m) / (2 * h),
                                      rel=1e-5, abs=1e-9)
            assert dd == pytest.approx((d_p - d_m) / (2 * h),
                                       rel=1e-5, abs=1e-9)

    def test_vectorized_matches_scalar(self):
        spec = BumpSpec(2.0)
        rs = np.linspace(0.0, 6.0, 601)
        v, d, dd = profiles.rho_many(spec, rs)
        for i, r in enumerate(rs):
            sv, sd, sdd = profiles.rho(spec, float(r))
            assert v[i] == pytest.approx(sv, rel=1e-13, abs=1e-15)
            assert d[i] == pytest.approx(sd, rel=1e-13, abs=1e-15)
            assert dd[i] == pytest.approx(sdd, rel=1e-13, abs=1e-15)


# ---------------------------------------------------------------------------
# warping functions
# ---------------------------------------------------------------------------

class TestWarpingFunctions:
    def test_hyperbolic_values(self, hyperbolic_profile):
        s, sp, spp, t, tp, tpp = hyperbolic_profile.sigma_tau(1.0)
        assert s == pytest.approx(math.sinh(1.0), rel=1e-15)
        assert sp == pytest.approx(math.cosh(1.0), rel=1e-15)
        assert spp == pytest.approx(math.sinh(1.0), rel=1e-15)
        assert t == pytest.approx(math.cosh(1.0), rel=1e-15)
        assert tp == pytest.approx(math.sinh(1.0), rel=1e-15)
        assert tpp == pytest.approx(math.cosh(1.0), rel=1e-15)

    def test_flat_values(self, flat_profile):
        assert flat_profile.sigma_tau(2.3) == (2.3, 1.0, 0.0, 1.0, 0.0, 0.0)

    def test_inner_region_is_euclidean_tube(self, ramp19):
        s, sp, spp, t, tp, tpp = ramp19.sigma_tau(0.02)
        assert s == pytest.approx(0.02, abs=1e-12)
        assert sp == pytest.approx(1.0, abs=1e-12)
        assert spp == pytest.approx(0.0, abs=1e-12)
        assert t == pytest.approx(1.0, abs=1e-12)
        assert tp == pytest.approx(0.0, abs=1e-12)
        assert tpp == pytest.approx(0.0, abs=1e-12)

    def test_outer_region_is_hyperbolic(self, ramp19):
        s, sp, _, t, tp, _ = ramp19.sigma_tau(40.0)
        assert s == pytest.approx(math.sinh(40.0), rel=1e-12)
        assert sp == pytest.approx(math.cosh(40.0), rel=1e-12)
        assert t == pytest.approx(math.cosh(40.0), rel=1e-12)
        assert tp == pytest.approx(math.sinh(40.0), rel=1e-12)

    def test_matching_radii(self, ramp19):
        assert ramp19.matching_radius == 39.0
        assert ramp19.tube_radius == pytest.approx(1.0 / 39.0, rel=1e-15)

    def test_boundary_matching_on_grid(self, ramp19):
        rs = np.arange(0.0, 60.0, 1e-3)
        sig, _, _, tau, _, _ = ramp19.sigma_tau_many(rs)
        inner = rs <= 1.0 / 39.0
        outer = rs >= 39.0
        assert_close(sig[inner], rs[inner], abs_tol=1e-12)
        assert_close(tau[inner], np.ones(inner.sum()), abs_tol=1e-12)
        assert_close(sig[outer], np.sinh(rs[outer]), rel=1e-12)
        assert_close(tau[outer], np.cosh(rs[outer]), rel=1e-12)

    def test_derivatives_match_finite_differences(self, ramp19):
        h = 1e-5
        for r in np.linspace(1.0 / 78.0, 78.0, 113):
            r = float(r)
            jm = ramp19.sigma_tau(r - h)
            jp = ramp19.sigma_tau(r + h)
            j = ramp19.sigma_tau(r)
            for val_idx, der_idx in ((0, 1), (1, 2), (3, 4), (4, 5)):
                fd = (jp[val_idx] - jm[val_idx]) / (2 * h)
                scale = max(1.0, abs(j[der_idx]))
                assert abs(j[der_idx] - fd) <= 1e-5 * scale

    def test_negative_radius_rejected(self, ramp19, hyperbolic_profile):
        for prof in (ramp19, hyperbolic_profile):
            with pytest.raises(ValueError):
                prof.sigma_tau(-0.1)

    def test_wrapper_matches_method(self, ramp19):
        assert profiles.sigma_tau(ramp19, 3.7) == ramp19.sigma_tau(3.7)


# ---------------------------------------------------------------------------
# grid verification
# ---------------------------------------------------------------------------

CHECK_NAMES = {
    "sigma_nonneg", "tau_nonneg", "sigma_slope_ge_one", "tau_slope_nonneg",
    "sigma_convex", "tau_convex", "step_convexity_margin",
}


class TestGridVerification:
    def test_default_ramp_passes_all_checks(self, ramp19):
        report = profiles.verify_profile(ramp19, 60.0, 1e-3)
        assert {c.name for c in report.checks} == CHECK_NAMES
        assert report.all_passed
        for check in report.checks:
            assert check.worst_value >= -1e-10

    def test_hyperbolic_passes_all_checks(self, hyperbolic_profile):
        report = profiles.verify_profile(hyperbolic_profile, 60.0, 1e-3)
        assert {c.name for c in report.checks} == CHECK_NAMES
        assert report.all_passed

    def test_small_ramp_convexity_margin_is_zero(self):
        # dense brute-force oracle over the ramp support of k=2
        spec = BumpSpec(2.0)
        grid = np.arange(0.4, 5.0, 1e-6)
        value, _, curv = profiles.rho_many(spec, grid)
        margin = curv + value
        assert float(margin.min()) == 0.0
        assert not (margin < 0.0).any()

        report = profiles.verify_profile(
            WarpingProfile.interpolated(2.0), 20.0, 1e-4)
        check = _check(report, "step_convexity_margin")
        assert check.passed
        assert check.worst_value == 0.0

    def test_unit_ramp_fails_convexity_margin(self):
        report = profiles.verify_profile(
            WarpingProfile.interpolated(1.0), 20.0, 1e-4)
        assert not report.all_passed
        check = _check(report, "step_convexity_margin")
        assert not check.passed
        assert check.worst_value == pytest.approx(
            UNIT_RAMP_MIN_COARSE, rel=1e-12)
        assert check.worst_value == pytest.approx(
            UNIT_RAMP_MIN_GRID, abs=5e-7)
        assert check.worst_location == pytest.approx(
            UNIT_RAMP_ARGMIN_GRID, abs=1e-3)
        # other checks are unaffected by the convexity failure
        assert _check(report, "sigma_nonneg").passed
        assert _check(report, "tau_nonneg").passed

    def test_unit_ramp_dense_scan_frozen(self):
        spec = BumpSpec(1.0)
        grid = np.arange(1.0, 3.0, 1e-6)
        value, _, curv = profiles.rho_many(spec, grid)
        margin = curv + value
        i = int(np.argmin(margin))
        assert float(margin[i]) == pytest.approx(UNIT_RAMP_MIN_GRID,
                                                 rel=1e-12)
        assert float(grid[i]) == pytest.approx(UNIT_RAMP_ARGMIN_GRID,
                                               abs=1e-9)

        refined = minimize_scalar(
            lambda r: sum(profiles.rho(spec, r)[::2]),
            bounds=(float(grid[i]) - 2e-6, float(grid[i]) + 2e-6),
            method="bounded", options={"xatol": 1e-12})
        assert float(refined.fun) == pytest.approx(UNIT_RAMP_MIN_REFINED,
                                                   abs=1e-10)
        assert float(refined.x) == pytest.approx(UNIT_RAMP_ARGMIN_REFINED,
                                                 abs=1e-6)

    def test_report_metadata(self, ramp19):
        report = profiles.verify_profile(ramp19, 60.0, 1e-3)
        assert report.k == 19.0
        assert report.grid_max == 60.0
        assert report.grid_step == 1e-3
        assert report.slack == -1e-10


def _check(report, name):
    matches = [c for c in report.checks if c.name == name]
    assert len(matches) == 1
    return matches[0]


# ---------------------------------------------------------------------------
# curvature ratios (cancellation-free building blocks used downstream)
# ---------------------------------------------------------------------------

class TestCurvatureRatios:
    def test_flat_ratios_vanish(self, flat_profile):
        assert flat_profile.curvature_ratios(0.7) == (0.0, 0.0, 0.0, 0.0)

    def test_hyperbolic_ratios_are_minus_one(self, hyperbolic_profile):
        for r in (0.3, 1.0, 5.0, 20.0):
            assert_close(hyperbolic_profile.curvature_ratios(r),
                         [-1.0, -1.0, -1.0, -1.0], rel=1e-12)

    def test_ramp_ratios_match_direct_quotients(self, ramp19):
        for r in (0.5, 2.0, 19.0, 35.0):
            s, sp, spp, t, tp, tpp = ramp19.sigma_tau(r)
            direct = (-spp / s, -(sp * sp - 1.0) / (s * s),
                      -tpp / t, -sp * tp / (s * t))
            assert_close(ramp19.curvature_ratios(r), direct,
                         rel=1e-9, abs_tol=1e-12)

    def test_ratios_nonpositive_everywhere(self, ramp19):
        for r in np.geomspace(1e-4, 60.0, 200):
            ratios = ramp19.curvature_ratios(float(r))
            assert max(ratios) <= 1e-12
