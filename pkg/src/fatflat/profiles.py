"""Warping profiles: compactly supported bump, its integral, and the
sigma/tau pair interpolating between a flat tube and a hyperbolic cone.

The interpolated profile glues sigma(r) = r near the axis to
sigma(r) = sinh(r) outside a matching radius, through a smoothed step
built from the integral of a C-infinity bump.  All order and convexity
properties required for nonpositive curvature are checked numerically on
a grid by verify_profile.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


class QuadratureError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


@dataclass(frozen=True)
class BumpSpec:
    """Parameters of the bump exp(-k^2/(k^2 - x^2)) on (-k, k)."""

    k: float
    quadrature_tol: float = 1e-12

    def __post_init__(self):
        if not self.k >= 1.0:
            raise ValueError(f"bump width k must be >= 1, got {self.k}")
        if not 0.0 < self.quadrature_tol:
            raise ValueError("quadrature tolerance must be positive")


def bump_f(spec: BumpSpec, x: float) -> float:
    """Bump value at x; zero outside [-k, k], maximum exp(-1) at 0."""
    k = spec.k
    u = k * k - x * x
    if u <= 0.0:
        return 0.0
    return math.exp(-k * k / u)


def bump_f_prime(spec: BumpSpec, x: float) -> float:
    k = spec.k
    u = k * k - x * x
    if u <= 0.0:
        return 0.0
    return math.exp(-k * k / u) * (-2.0 * k * k * x / (u * u))


def bump_f_many(spec: BumpSpec, xs: np.ndarray) -> np.ndarray:
    k = spec.k
    xs = np.asarray(xs, dtype=float)
    u = k * k - xs * xs
    inside = u > 0.0
    out = np.zeros_like(xs)
    # evaluate only strictly inside the support to avoid 1/0 warnings
    ui = u[inside]
    out[inside] = np.exp(-k * k / ui)
    return out


def bump_f_prime_many(spec: BumpSpec, xs: np.ndarray) -> np.ndarray:
    k = spec.k
    xs = np.asarray(xs, dtype=float)
    u = k * k - xs * xs
    inside = u > 0.0
    out = np.zeros_like(xs)
    ui = u[inside]
    out[inside] = np.exp(-k * k / ui) * (-2.0 * k * k * xs[inside] / (ui * ui))
    return out


def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 48) -> float:
    """Classic adaptive Simpson with Richardson correction."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    m = 0.5 * (a + b)
    stack = [(a, b, f(a), f(m), f(b), simpson(a, b, f(a), f(m), f(b)), tol, 0)]
    total = 0.0
    while stack:
        x0, x2, f0, f1, f2, whole, tol_i, depth = stack.pop()
        xm = 0.5 * (x0 + x2)
        lm = 0.5 * (x0 + xm)
        rm = 0.5 * (xm + x2)
        fl = f(lm)
        fr = f(rm)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        err = left + right - whole
        if abs(err) <= 15.0 * tol_i:
            total += left + right + err / 15.0
        elif depth >= max_depth:
            raise QuadratureError(
                f"tolerance {tol_i:g} unreachable at depth {depth} on "
                f"[{x0:g}, {x2:g}]")
        else:
            half_tol = 0.5 * tol_i
            stack.append((x0, xm, f0, fl, f1, left, half_tol, depth + 1))
            stack.append((xm, x2, f1, fr, f2, right, half_tol, depth + 1))
    return total


_TOTAL_MEMO: dict[tuple[float, float], float] = {}


def bump_integral_F(spec: BumpSpec, x: float) -> float:
    """Integral of the bump from -k to x, by adaptive Simpson quadrature.

    The full mass F(k) is memoized per (k, tol) after the first evaluation.
    Raises QuadratureError when the tolerance cannot be met in double
    precision.
    """
    k = spec.k
    if not math.isfinite(x):
        raise ValueError(f"integration endpoint must be finite, got {x}")
    if x <= -k:
        return 0.0
    key = (k, spec.quadrature_tol)
    if x >= k:
        if key not in _TOTAL_MEMO:
            _TOTAL_MEMO[key] = _adaptive_simpson(
                lambda t: bump_f(spec, t), -k, k, spec.quadrature_tol)
        return _TOTAL_MEMO[key]
    return _adaptive_simpson(lambda t: bump_f(spec, t), -k, x,
                             spec.quadrature_tol)


# ---------------------------------------------------------------------------
# fast evaluation path: cumulative fixed-order panels
#
# Scans and flow integration evaluate F at millions of points; adaptive
# quadrature per call is far too slow there.  A cumulative table of
# 12-node Gauss panels gives machine-accurate values in O(1) per query and
# is cross-checked against bump_integral_F in the tests.

_GL_NODES, _GL_WEIGHTS = leggauss(12)
_N_PANELS = 4096


@lru_cache(maxsize=8)
def _bump_table(k: float):
    edges = np.linspace(-k, k, _N_PANELS + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    spec = BumpSpec(k)
    pts = mid[:, None] + half * _GL_NODES[None, :]
    vals = bump_f_many(spec, pts.ravel()).reshape(pts.shape)
    panel = half * vals @ _GL_WEIGHTS
    cum = np.concatenate([[0.0], np.cumsum(panel)])
    return edges, cum


def _F_fast(k: float, x: float) -> float:
    if x <= -k:
        return 0.0
    edges, cum = _bump_table(k)
    if x >= k:
        return float(cum[-1])
    i = min(bisect_right(edges, x) - 1, _N_PANELS - 1)
    a = edges[i]
    halfw = 0.5 * (x - a)
    midp = a + halfw
    kk = k * k
    acc = 0.0
    for node, w in zip(_GL_NODES, _GL_WEIGHTS):
        t = midp + halfw * node
        u = kk - t * t
        if u > 0.0:
            acc += w * math.exp(-kk / u)
    return float(cum[i]) + halfw * acc


def _F_fast_many(k: float, xs: np.ndarray) -> np.ndarray:
    edges, cum = _bump_table(k)
    xs = np.asarray(xs, dtype=float)
    xc = np.clip(xs, -k, k)
    idx = np.clip(np.searchsorted(edges, xc, side="right") - 1, 0,
                  _N_PANELS - 1)
    a = edges[idx]
    halfw = 0.5 * (xc - a)
    pts = (a + halfw)[:, None] + halfw[:, None] * _GL_NODES[None, :]
    vals = bump_f_many(BumpSpec(k), pts.ravel()).reshape(pts.shape)
    return cum[idx] + halfw * (vals @ _GL_WEIGHTS)


def rho(spec: BumpSpec, r: float) -> tuple[float, float, float]:
    """Smoothed step (value, first, second derivative) at radius r.

    rho ramps from 0 to 1 as r crosses the window
    [1/k, 2k + 1/k]; it is identically 0 and 1 outside.
    """
    k = spec.k
    shift = k + 1.0 / k
    y = r - shift
    if y <= -k:
        return 0.0, 0.0, 0.0
    total = _bump_table(k)[1][-1]
    if y >= k:
        return 1.0, 0.0, 0.0
    return (_F_fast(k, y) / total,
            bump_f(spec, y) / total,
            bump_f_prime(spec, y) / total)


def rho_many(spec: BumpSpec, rs: np.ndarray):
    k = spec.k
    y = np.asarray(rs, dtype=float) - (k + 1.0 / k)
    total = _bump_table(k)[1][-1]
    val = _F_fast_many(k, y) / total
    val[y >= k] = 1.0
    d1 = bump_f_many(spec, y) / total
    d2 = bump_f_prime_many(spec, y) / total
    return val, d1, d2


# ---------------------------------------------------------------------------
# stable small-r combinations of sinh/cosh used by profile and metric code

def sinh_minus_linear(r: float) -> float:
    """sinh(r) - r without cancellation at small r."""
    if r < 0.75:
        u = r * r
        # sum_{m>=1} r^(2m+1)/(2m+1)!
        c = (1 / 6, 1 / 120, 1 / 5040, 1 / 362880, 1 / 39916800,
             1 / 6227020800, 1 / 1307674368000, 1 / 355687428096000,
             1 / 121645100408832000)
        acc = c[-1]
        for cm in reversed(c[:-1]):
            acc = acc * u + cm
        return acc * u * r
    return math.sinh(r) - r


def cosh_minus_one(r: float) -> float:
    s = math.sinh(0.5 * r)
    return 2.0 * s * s


def sinh_minus_linear_over_r3(r: float) -> float:
    """(sinh(r) - r)/r^3, finite limit 1/6 at r = 0."""
    if r == 0.0:
        return 1.0 / 6.0
    if r < 0.75:
        u = r * r
        c = (1 / 6, 1 / 120, 1 / 5040, 1 / 362880, 1 / 39916800,
             1 / 6227020800, 1 / 1307674368000, 1 / 355687428096000,
             1 / 121645100408832000)
        acc = c[-1]
        for cm in reversed(c[:-1]):
            acc = acc * u + cm
        return acc
    return (math.sinh(r) - r) / (r * r * r)


def cosh_defect_over_r2(r: float) -> float:
    """(cosh(r) - 1 - (sinh(r) - r)/r) / r^2, finite limit 1/3 at r = 0."""
    if r < 0.75:
        u = r * r
        # sum_{m>=1} r^(2m-2) * 2m/(2m+1)!
        c = (1 / 3, 1 / 30, 1 / 840, 1 / 45360, 1 / 3991680,
             12 / 6227020800, 14 / 1307674368000, 16 / 355687428096000,
             18 / 121645100408832000)
        acc = c[-1]
        for cm in reversed(c[:-1]):
            acc = acc * u + cm
        return acc
    return (cosh_minus_one(r) - (math.sinh(r) - r) / r) / (r * r)


# ---------------------------------------------------------------------------

_VARIANTS = ("flat", "hyperbolic", "interpolated")


@dataclass(frozen=True)
class WarpingProfile:
    """A (sigma, tau) warping pair.

    variant 'flat' is sigma = r, tau = 1; 'hyperbolic' is sinh/cosh;
    'interpolated' blends the two through the smoothed step of a BumpSpec.
    Convexity of the blend is only guaranteed for k >= 18; smaller k is
    allowed so that the failure mode itself can be measured.
    """

    variant: str
    bump: BumpSpec | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown profile variant {self.variant!r}")
        if self.variant == "interpolated" and self.bump is None:
            raise ValueError("interpolated profile needs a BumpSpec")

    @classmethod
    def flat(cls) -> "WarpingProfile":
        return cls("flat")

    @classmethod
    def hyperbolic(cls) -> "WarpingProfile":
        return cls("hyperbolic")

    @classmethod
    def interpolated(cls, k: float = 19.0) -> "WarpingProfile":
        return cls("interpolated", BumpSpec(k))

    @property
    def matching_radius(self) -> float:
        """Radius beyond which the profile is exactly hyperbolic."""
        if self.variant != "interpolated":
            raise ValueError("matching radius only defined for interpolated")
        return 2.0 * self.bump.k + 1.0

    @property
    def tube_radius(self) -> float:
        """Radius below which the metric is exactly flat (1/matching_radius)."""
        return 1.0 / self.matching_radius

    def rho_jet(self, r: float) -> tuple[float, float, float]:
        if self.variant == "flat":
            return 0.0, 0.0, 0.0
        if self.variant == "hyperbolic":
            return 1.0, 0.0, 0.0
        return rho(self.bump, r)

    def sigma_tau(self, r: float):
        """(sigma, sigma', sigma'', tau, tau', tau'') at radius r >= 0."""
        if r < 0.0:
            raise ValueError(f"radius must be nonnegative, got {r}")
        if self.variant == "flat":
            return r, 1.0, 0.0, 1.0, 0.0, 0.0
        if self.variant == "hyperbolic":
            sh, ch = math.sinh(r), math.cosh(r)
            return sh, ch, sh, ch, sh, ch
        p, p1, p2 = rho(self.bump, r)
        if p == 0.0 and p1 == 0.0:
            return r, 1.0, 0.0, 1.0, 0.0, 0.0
        sh, ch = math.sinh(r), math.cosh(r)
        if p == 1.0 and p1 == 0.0:
            return sh, ch, sh, ch, sh, ch
        sml = sinh_minus_linear(r)
        cm1 = cosh_minus_one(r)
        sigma = r + p * sml
        sigma_p = 1.0 + p1 * sml + p * cm1
        sigma_pp = p2 * sml + 2.0 * p1 * cm1 + p * sh
        tau = 1.0 + p * cm1
        tau_p = p1 * cm1 + p * sh
        tau_pp = p2 * cm1 + 2.0 * p1 * sh + p * ch
        return sigma, sigma_p, sigma_pp, tau, tau_p, tau_pp

    def sigma_tau_many(self, rs: np.ndarray):
        rs = np.asarray(rs, dtype=float)
        if np.any(rs < 0.0):
            raise ValueError("radii must be nonnegative")
        if self.variant == "flat":
            one = np.ones_like(rs)
            zero = np.zeros_like(rs)
            return rs.copy(), one, zero, one.copy(), zero.copy(), zero.copy()
        sh, ch = np.sinh(rs), np.cosh(rs)
        if self.variant == "hyperbolic":
            return sh, ch, sh.copy(), ch.copy(), sh.copy(), ch.copy()
        p, p1, p2 = rho_many(self.bump, rs)
        sml = sh - rs
        small = rs < 0.75
        if np.any(small):
            sml[small] = np.array([sinh_minus_linear(float(r))
                                   for r in rs[small]])
        cm1 = 2.0 * np.sinh(0.5 * rs) ** 2
        sigma = rs + p * sml
        sigma_p = 1.0 + p1 * sml + p * cm1
        sigma_pp = p2 * sml + 2.0 * p1 * cm1 + p * sh
        tau = 1.0 + p * cm1
        tau_p = p1 * cm1 + p * sh
        tau_pp = p2 * cm1 + 2.0 * p1 * sh + p * ch
        return sigma, sigma_p, sigma_pp, tau, tau_p, tau_pp

    def curvature_ratios(self, r: float) -> tuple[float, float, float, float]:
        """Principal sectional curvatures at radius r > 0.

        Returns (sphere-radial, sphere-sphere, z-radial, sphere-z), i.e.
        (-sigma''/sigma, (1 - sigma'^2)/sigma^2, -tau''/tau,
        -sigma' tau'/(sigma tau)).  All four are <= 0 for a convex profile.
        """
        if self.variant == "flat":
            return 0.0, 0.0, 0.0, 0.0
        if self.variant == "hyperbolic":
            return -1.0, -1.0, -1.0, -1.0
        p, p1, p2 = rho(self.bump, r)
        if p == 0.0 and p1 == 0.0 and p2 == 0.0:
            return 0.0, 0.0, 0.0, 0.0
        if p == 1.0 and p1 == 0.0 and p2 == 0.0:
            return -1.0, -1.0, -1.0, -1.0
        sh, ch = math.sinh(r), math.cosh(r)
        sml = sinh_minus_linear(r)
        cm1 = cosh_minus_one(r)
        sigma = r + p * sml
        sigma_p_m1 = p1 * sml + p * cm1     # sigma' - 1, no cancellation
        sigma_p = 1.0 + sigma_p_m1
        sigma_pp = p2 * sml + 2.0 * p1 * cm1 + p * sh
        tau = 1.0 + p * cm1
        tau_p = p1 * cm1 + p * sh
        tau_pp = p2 * cm1 + 2.0 * p1 * sh + p * ch
        return (-sigma_pp / sigma,
                -sigma_p_m1 * (sigma_p + 1.0) / (sigma * sigma),
                -tau_pp / tau,
                -sigma_p * tau_p / (sigma * tau))


def sigma_tau(profile: WarpingProfile, r: float):
    """Module-level alias for WarpingProfile.sigma_tau."""
    return profile.sigma_tau(r)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileCheck:
    name: str
    passed: bool
    worst_value: float
    worst_location: float


@dataclass(frozen=True)
class PropertyReport:
    variant: str
    k: float | None
    grid_min: float
    grid_max: float
    grid_step: float
    slack: float
    checks: tuple[ProfileCheck, ...] = field(default_factory=tuple)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def verify_profile(profile: WarpingProfile, grid_max: float = 60.0,
                   grid_step: float = 1e-3,
                   slack: float = -1e-10) -> PropertyReport:
    """Check the seven order/convexity properties of a profile on a grid.

    Each check passes when its defining quantity stays >= slack at every
    grid point; the report records the worst value and where it occurred.
    """
    if grid_max <= 0 or grid_step <= 0:
        raise ValueError("grid bounds must be positive")
    n = int(round(grid_max / grid_step))
    rs = np.linspace(0.0, n * grid_step, n + 1)
    sigma, sigma_p, sigma_pp, tau, tau_p, tau_pp = profile.sigma_tau_many(rs)
    if profile.variant == "interpolated":
        p, _, p2 = rho_many(profile.bump, rs)
    else:
        p = np.full_like(rs, 1.0 if profile.variant == "hyperbolic" else 0.0)
        p2 = np.zeros_like(rs)

    quantities = (
        ("sigma_nonneg", sigma),
        ("tau_nonneg", tau),
        ("sigma_slope_ge_one", sigma_p - 1.0),
        ("tau_slope_nonneg", tau_p),
        ("sigma_convex", sigma_pp),
        ("tau_convex", tau_pp),
        ("step_convexity_margin", p2 + p),
    )
    checks = []
    for name, q in quantities:
        i = int(np.argmin(q))
        worst = float(q[i])
        checks.append(ProfileCheck(name, worst >= slack, worst, float(rs[i])))
    k = profile.bump.k if profile.bump is not None else None
    return PropertyReport(profile.variant, k, 0.0, float(rs[-1]), grid_step,
                          slack, tuple(checks))
