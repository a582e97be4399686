"""Coordinate charts for axially warped metrics and their curvature.

Three chart kinds cover the model space R^(2n+1) (and its 4-dimensional
reduction): a polar chart built on hyperspherical sphere coordinates, an
axis-regular Cartesian chart that stays smooth through r = 0, and the
4-dimensional model chart (r, theta, phi, z) used for plane-by-plane
curvature work.  Every chart evaluates the metric tensor, Christoffel
symbols, the lowered Riemann tensor and sectional curvatures, and the
module provides randomized nonpositivity scans over coordinate boxes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dualnum as dn
from .profiles import (
    WarpingProfile,
    cosh_minus_one,
    sinh_minus_linear,
    sinh_minus_linear_over_r3,
)
from .rng import sample_stream, worker_count

POLAR = "polar"
CARTESIAN = "cartesian"
FOUR_D = "four_d_model"

R_MIN = 1e-8
_PLANE_TOL = 1e-14


class ChartDomainError(ValueError):
    """Raised for coordinates outside a chart's valid region."""


class DegeneratePlaneError(ValueError):
    """Raised when two vectors do not span a 2-plane."""


# ---------------------------------------------------------------------------
# charts and points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricChart:
    """A coordinate chart carrying the warped metric.

    kind 'polar': coordinates (r, a_1..a_{2n-1}, z) with hyperspherical
    angles on the sphere factor; valid for r >= R_MIN.
    kind 'cartesian': coordinates (x_1..x_{2n}, z); valid everywhere,
    including the axis x = 0.
    kind 'four_d_model': coordinates (r, theta, phi, z) on R^4 with
    theta in (0, pi); the reduction chart for plane curvature.
    """

    kind: str
    n: int
    profile: WarpingProfile

    def __post_init__(self):
        if self.kind not in (POLAR, CARTESIAN, FOUR_D):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @classmethod
    def polar(cls, profile: WarpingProfile, n: int = 1) -> "MetricChart":
        return cls(POLAR, n, profile)

    @classmethod
    def cartesian(cls, profile: WarpingProfile, n: int = 1) -> "MetricChart":
        return cls(CARTESIAN, n, profile)

    @classmethod
    def four_d_model(cls, profile: WarpingProfile) -> "MetricChart":
        return cls(FOUR_D, 1, profile)

    @property
    def dim(self) -> int:
        return 4 if self.kind == FOUR_D else 2 * self.n + 1

    @property
    def block_dim(self) -> int:
        """Dimension of the part transverse to the z-axis."""
        return 3 if self.kind == FOUR_D else 2 * self.n

    def radius_of(self, coords: np.ndarray) -> float:
        """Distance from the axis encoded by the coordinates."""
        if self.kind == CARTESIAN:
            return float(np.linalg.norm(coords[: self.block_dim]))
        return float(coords[0])

    def contains(self, coords) -> bool:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.dim,):
            return False
        if self.kind == CARTESIAN:
            return bool(np.all(np.isfinite(coords)))
        if not np.all(np.isfinite(coords)) or coords[0] < R_MIN:
            return False
        if self.kind == FOUR_D:
            return 0.0 < coords[1] < math.pi
        # polar: all hyperspherical angles except the last live in (0, pi)
        for i in range(1, self.block_dim - 1):
            if not 0.0 < coords[i] < math.pi:
                return False
        return True

    def point(self, coords) -> "ChartPoint":
        coords = np.asarray(coords, dtype=float)
        if not self.contains(coords):
            raise ChartDomainError(
                f"coordinates {coords!r} invalid for {self.kind} chart "
                f"(dim {self.dim})")
        return ChartPoint(coords, self)


@dataclass(frozen=True)
class ChartPoint:
    coords: np.ndarray
    chart: MetricChart

    @property
    def radius(self) -> float:
        return self.chart.radius_of(self.coords)


@dataclass(frozen=True)
class TangentPlane:
    """A 2-plane spanned by two tangent vectors at a chart point."""

    point: ChartPoint
    u: np.ndarray
    v: np.ndarray


# ---------------------------------------------------------------------------
# axis-regular coefficients for the Cartesian chart
#
# On the transverse block the metric is A(r) I + B(r) x x^T with
# A = (sigma/r)^2 and B = (r^2 - sigma^2)/r^4, so A + B r^2 = 1 identically.
# A, B, A'/r, B'/r and 2 tau tau'/r all extend smoothly through r = 0 and are
# evaluated in cancellation-free form below.
# ---------------------------------------------------------------------------

def _mu_ds(r: float) -> float:
    """d/ds of (sinh r - r)/r^3 viewed as a function of s = r^2."""
    if r < 0.75:
        s = r * r
        return (1.0 / 120.0 + s * (1.0 / 2520.0 + s * (1.0 / 120960.0
                + s * (1.0 / 9979200.0 + s / 1245404160.0))))
    m = sinh_minus_linear(r)
    c1 = cosh_minus_one(r)
    return (r * c1 - 3.0 * m) / (2.0 * r ** 5)


def _mu_ds2(r: float) -> float:
    """Second s-derivative of (sinh r - r)/r^3, s = r^2."""
    if r < 0.75:
        s = r * r
        return (1.0 / 2520.0 + s * (1.0 / 60480.0 + s * (1.0 / 3326400.0
                + s / 311351040.0)))
    m = sinh_minus_linear(r)
    c1 = cosh_minus_one(r)
    n_val = r * c1 - 3.0 * m
    np_val = r * (m + r) - 2.0 * c1          # d/dr of n_val; sinh = m + r
    return (np_val * r - 5.0 * n_val) / (4.0 * r ** 7)


def _axis_coeffs_hyperbolic(r: float):
    s = r * r
    mu = sinh_minus_linear_over_r3(r)
    mup = _mu_ds(r)
    mupp = _mu_ds2(r)
    mu2 = sinh_minus_linear_over_r3(2.0 * r)
    smu = s * mu
    a_val = (1.0 + smu) ** 2
    b_val = -(2.0 * mu + smu * mu)
    apr = 4.0 * (1.0 + smu) * (mu + s * mup)
    bpr = -(4.0 * mup + 2.0 * mu * mu + 4.0 * smu * mup)
    apr2 = 8.0 * ((mu + s * mup) ** 2
                  + (1.0 + smu) * (2.0 * mup + s * mupp))
    bpr2 = -8.0 * (mupp + 2.0 * mu * mup + s * mup * mup + smu * mupp)
    ch = math.cosh(r)
    tau2 = ch * ch
    tpr = 2.0 + 8.0 * s * mu2
    tpr2 = 16.0 * mu2 + 64.0 * s * _mu_ds(2.0 * r)
    return a_val, b_val, apr, bpr, tau2, tpr, apr2, bpr2, tpr2


_FLAT_COEFFS = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0)


def axis_coefficient_jets(profile: WarpingProfile, r: float):
    """(A, B, A'/r, B'/r, tau^2, 2 tau tau'/r, (A'/r)'/r, (B'/r)'/r,
    (2 tau tau'/r)'/r) at radius r >= 0.

    These nine functions determine the Cartesian metric and its first and
    second coordinate derivatives; all are smooth even functions of r and
    are evaluated in cancellation-free form.
    """
    if r < 0.0:
        raise ValueError("radius must be nonnegative")
    if profile.variant == "flat":
        return _FLAT_COEFFS
    if profile.variant == "hyperbolic":
        return _axis_coeffs_hyperbolic(r)
    p, p1, p2 = profile.rho_jet(r)
    if p == 0.0 and p1 == 0.0 and p2 == 0.0:
        return _FLAT_COEFFS
    if p == 1.0 and p1 == 0.0 and p2 == 0.0:
        return _axis_coeffs_hyperbolic(r)
    # ramp region: r >= 1/k, so plain powers of r are harmless while every
    # difference below stays an explicit multiple of the step function
    m = sinh_minus_linear(r)
    c1 = cosh_minus_one(r)
    sh = m + r
    ch = 1.0 + c1
    pm = p * m
    sigma = r + pm
    bump = p1 * m + p * c1                      # sigma' - 1
    sigma_pp = p2 * m + 2.0 * p1 * c1 + p * sh  # sigma''
    tau = 1.0 + p * c1
    tau_p = p1 * c1 + p * sh
    tau_pp = p2 * c1 + 2.0 * p1 * sh + p * ch
    r2 = r * r
    r4 = r2 * r2
    e_val = pm / r                              # sigma/r - 1
    a_val = (1.0 + e_val) ** 2
    b_val = -e_val * (2.0 + e_val) / r2
    apr = 2.0 * sigma * (r * bump - pm) / r4
    r_minus_ss = -(pm + r * bump + pm * bump)   # r - sigma sigma'
    bpr = 2.0 * r_minus_ss / (r4 * r) - 4.0 * b_val / r2
    tau2 = tau * tau
    tpr = 2.0 * tau * tau_p / r
    # second radial derivatives: (A'/r)'/r = (A'' - A'/r)/r^2 etc., with the
    # flat parts cancelled symbolically so only step-scaled terms remain
    apr2 = ((6.0 * (e_val - bump) + 2.0 * bump * bump
             - 10.0 * e_val * bump + 8.0 * e_val * e_val) / r4
            + 2.0 * (1.0 + e_val) * sigma_pp / (r2 * r))
    phi = 2.0 * e_val + e_val * e_val
    e_p = (bump - e_val) / r
    e_pp = (sigma_pp - 2.0 * e_p) / r
    phi_p = 2.0 * e_p * (1.0 + e_val)
    phi_pp = 2.0 * e_pp * (1.0 + e_val) + 2.0 * e_p * e_p
    bpr2 = (-phi_pp * r2 + 5.0 * phi_p * r - 8.0 * phi) / (r4 * r2)
    tpr2 = (2.0 * (tau_p * tau_p + tau * tau_pp) - tpr) / r2
    return a_val, b_val, apr, bpr, tau2, tpr, apr2, bpr2, tpr2


def axis_coefficients(profile: WarpingProfile, r: float):
    """(A, B, A'/r, B'/r, tau^2, 2 tau tau'/r) at radius r >= 0."""
    return axis_coefficient_jets(profile, r)[:6]


# ---------------------------------------------------------------------------
# metric jets
# ---------------------------------------------------------------------------

def _diag_factors(chart: MetricChart):
    """Per-diagonal-entry factor lists for the polar and 4d-model charts.

    Each metric diagonal entry is a product of single-variable factors;
    a factor is ('s2',) for sigma(r)^2, ('t2',) for tau(r)^2, or
    ('sin2', j) for sin^2 of coordinate j.  Variable of the warp factors
    is coordinate 0 (= r).
    """
    if chart.kind == FOUR_D:
        return [[], [("s2",)], [("s2",), ("sin2", 1)], [("t2",)]]
    entries = [[]]
    for i in range(chart.block_dim - 1):
        entries.append([("s2",)] + [("sin2", 1 + j) for j in range(i)])
    entries.append([("t2",)])
    return entries


def _factor_jet(factor, coords, warp):
    """(variable index, value, d/dx, d2/dx2) of one metric factor."""
    sg, sgp, sgpp, tu, tup, tupp = warp
    if factor[0] == "s2":
        return 0, sg * sg, 2.0 * sg * sgp, 2.0 * (sgp * sgp + sg * sgpp)
    if factor[0] == "t2":
        return 0, tu * tu, 2.0 * tu * tup, 2.0 * (tup * tup + tu * tupp)
    j = factor[1]
    sn, cs = math.sin(coords[j]), math.cos(coords[j])
    return j, sn * sn, 2.0 * sn * cs, 2.0 * (cs * cs - sn * sn)


def _diag_metric_jets(chart: MetricChart, coords: np.ndarray, order: int):
    """Metric, and optionally its first/second coordinate derivatives.

    Returns (g,), (g, dg) or (g, dg, d2g) according to order in {0, 1, 2},
    with dg[k, i, j] = d_k g_ij and d2g[l, k, i, j] = d_l d_k g_ij.
    """
    dim = chart.dim
    warp = chart.profile.sigma_tau(float(coords[0]))
    g = np.zeros((dim, dim))
    dg = np.zeros((dim, dim, dim)) if order >= 1 else None
    d2g = np.zeros((dim, dim, dim, dim)) if order >= 2 else None
    g[0, 0] = 1.0
    for i, factors in enumerate(_diag_factors(chart)):
        if not factors:
            continue
        jets = [_factor_jet(f, coords, warp) for f in factors]
        vals = [j[1] for j in jets]
        g[i, i] = math.prod(vals)
        if order == 0:
            continue
        for a, (ka, va, d1a, d2a) in enumerate(jets):
            rest_a = math.prod(vals[b] for b in range(len(vals)) if b != a)
            dg[ka, i, i] += rest_a * d1a
            if order < 2:
                continue
            d2g[ka, ka, i, i] += rest_a * d2a
            for b in range(a + 1, len(jets)):
                kb, vb, d1b, _ = jets[b]
                rest_ab = math.prod(vals[c] for c in range(len(vals))
                                    if c not in (a, b))
                d2g[ka, kb, i, i] += rest_ab * d1a * d1b
                d2g[kb, ka, i, i] += rest_ab * d1a * d1b
    out = [g]
    if order >= 1:
        out.append(dg)
    if order >= 2:
        out.append(d2g)
    return tuple(out)


def _cartesian_metric_jets(chart: MetricChart, coords: np.ndarray,
                           order: int):
    dim, d = chart.dim, chart.block_dim
    x = coords[:d]
    r = float(np.linalg.norm(x))
    (a_val, b_val, apr, bpr, tau2, tpr,
     apr2, bpr2, tpr2) = axis_coefficient_jets(chart.profile, r)
    g = np.zeros((dim, dim))
    g[:d, :d] = a_val * np.eye(d) + b_val * np.outer(x, x)
    g[d, d] = tau2
    if order == 0:
        return (g,)
    dg = np.zeros((dim, dim, dim))
    eye = np.eye(d)
    xx = np.outer(x, x)
    for k in range(d):
        blk = apr * x[k] * eye + bpr * x[k] * xx
        blk += b_val * (np.outer(eye[k], x) + np.outer(x, eye[k]))
        dg[k, :d, :d] = blk
        dg[k, d, d] = tpr * x[k]
    if order == 1:
        return g, dg
    d2g = np.zeros((dim, dim, dim, dim))
    for ell in range(d):
        for k in range(d):
            blk = apr2 * x[ell] * x[k] * eye + bpr2 * x[ell] * x[k] * xx
            blk += bpr * (x[k] * (np.outer(eye[ell], x)
                                  + np.outer(x, eye[ell]))
                          + x[ell] * (np.outer(eye[k], x)
                                      + np.outer(x, eye[k])))
            blk += b_val * (np.outer(eye[k], eye[ell])
                            + np.outer(eye[ell], eye[k]))
            if ell == k:
                blk += apr * eye + bpr * xx
            d2g[ell, k, :d, :d] = blk
            d2g[ell, k, d, d] = tpr2 * x[ell] * x[k]
            if ell == k:
                d2g[ell, k, d, d] += tpr
    return g, dg, d2g


def _metric_jets(chart: MetricChart, coords: np.ndarray, order: int):
    if chart.kind == CARTESIAN:
        return _cartesian_metric_jets(chart, coords, order)
    return _diag_metric_jets(chart, coords, order)


def _metric_inverse_raw(chart: MetricChart, coords: np.ndarray,
                        g: np.ndarray) -> np.ndarray:
    if chart.kind == CARTESIAN:
        d = chart.block_dim
        x = coords[:d]
        r = float(np.linalg.norm(x))
        a_val, b_val, _, _, tau2, _ = axis_coefficients(chart.profile, r)
        ginv = np.zeros((chart.dim, chart.dim))
        # (A I + B x x^T)^-1 = (I - B x x^T)/A since A + B r^2 = 1
        ginv[:d, :d] = (np.eye(d) - b_val * np.outer(x, x)) / a_val
        ginv[d, d] = 1.0 / tau2
        return ginv
    return np.diag(1.0 / np.diag(g))


def metric_tensor(point: ChartPoint) -> np.ndarray:
    """The metric as a symmetric positive-definite matrix at the point."""
    return _metric_jets(point.chart, point.coords, 0)[0]


def metric_inverse(point: ChartPoint) -> np.ndarray:
    g = _metric_jets(point.chart, point.coords, 0)[0]
    return _metric_inverse_raw(point.chart, point.coords, g)


def _gamma_from_jets(g: np.ndarray, dg: np.ndarray,
                     ginv: np.ndarray) -> np.ndarray:
    # C[m, j, k] = d_j g_mk + d_k g_mj - d_m g_jk
    c = (np.einsum("jmk->mjk", dg) + np.einsum("kmj->mjk", dg) - dg)
    return 0.5 * np.einsum("im,mjk->ijk", ginv, c)


def christoffel(point: ChartPoint) -> np.ndarray:
    """Connection coefficients Gamma[i, j, k] = Gamma^i_jk at the point."""
    chart = point.chart
    g, dg = _metric_jets(chart, point.coords, 1)
    return _gamma_from_jets(g, dg, _metric_inverse_raw(chart, point.coords, g))


def _dgamma_analytic(chart: MetricChart, coords: np.ndarray):
    """(g, Gamma, dGamma) with dGamma[l, i, j, k] = d_l Gamma^i_jk, from
    closed-form metric jets to second order."""
    g, dg, d2g = _metric_jets(chart, coords, 2)
    ginv = _metric_inverse_raw(chart, coords, g)
    c = (np.einsum("jmk->mjk", dg) + np.einsum("kmj->mjk", dg) - dg)
    gamma = 0.5 * np.einsum("im,mjk->ijk", ginv, c)
    dginv = -np.einsum("ia,lab,bj->lij", ginv, dg, ginv)
    dc = (np.einsum("ljmk->lmjk", d2g) + np.einsum("lkmj->lmjk", d2g)
          - np.einsum("lmjk->lmjk", d2g))
    dgamma = 0.5 * (np.einsum("lim,mjk->lijk", dginv, c)
                    + np.einsum("im,lmjk->lijk", ginv, dc))
    return g, gamma, dgamma


def _dgamma_stencil(chart: MetricChart, coords: np.ndarray, h: float):
    """(Gamma, dGamma) by fourth-order central differences of Gamma."""
    dim = chart.dim
    gamma = christoffel(ChartPoint(coords, chart))
    dgamma = np.zeros((dim, dim, dim, dim))

    def gamma_at(c):
        return christoffel(ChartPoint(c, chart))

    for ell in range(dim):
        step = np.zeros(dim)
        step[ell] = h
        gm2 = gamma_at(coords - 2.0 * step)
        gm1 = gamma_at(coords - step)
        gp1 = gamma_at(coords + step)
        gp2 = gamma_at(coords + 2.0 * step)
        dgamma[ell] = (gm2 - 8.0 * gm1 + 8.0 * gp1 - gp2) / (12.0 * h)
    return gamma, dgamma


def _riemann_from_gamma(g: np.ndarray, gamma: np.ndarray,
                        dgamma: np.ndarray) -> np.ndarray:
    # R^i_jkl = d_k Gamma^i_lj - d_l Gamma^i_kj
    #           + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj
    rup = (np.einsum("kilj->ijkl", dgamma) - np.einsum("likj->ijkl", dgamma)
           + np.einsum("ikm,mlj->ijkl", gamma, gamma)
           - np.einsum("ilm,mkj->ijkl", gamma, gamma))
    return np.einsum("im,mjkl->ijkl", g, rup)


def riemann(point: ChartPoint) -> np.ndarray:
    """Lowered curvature tensor R[i, j, k, l] = R_ijkl at the point,
    assembled from closed-form metric jets in every chart kind."""
    g, gamma, dgamma = _dgamma_analytic(point.chart, point.coords)
    return _riemann_from_gamma(g, gamma, dgamma)


def riemann_fd(point: ChartPoint, h: float | None = None) -> np.ndarray:
    """Cross-check variant of riemann: the derivatives of Gamma come from a
    fourth-order central stencil (step 1e-5 * max(1, r) by default) instead
    of the closed-form metric jets."""
    if h is None:
        h = 1e-5 * max(1.0, point.radius)
    gamma, dgamma = _dgamma_stencil(point.chart, point.coords, h)
    return _riemann_from_gamma(metric_tensor(point), gamma, dgamma)


# ---------------------------------------------------------------------------
# sectional curvature
# ---------------------------------------------------------------------------

def plane(point: ChartPoint, u, v) -> TangentPlane:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (point.chart.dim,) or v.shape != (point.chart.dim,):
        raise DegeneratePlaneError("vector dimension does not match chart")
    return TangentPlane(point, u, v)


def _gram(g: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    uu = float(u @ g @ u)
    vv = float(v @ g @ v)
    uv = float(u @ g @ v)
    return uu * vv - uv * uv


def sectional_curvature(pl: TangentPlane,
                        rie: np.ndarray | None = None) -> float:
    """K = R(u, v, u, v) / (|u|^2 |v|^2 - <u, v>^2).

    Diagonal charts contract the component tensor directly.  The Cartesian
    chart instead splits the vectors into radial/sphere/axis parts and uses
    the principal-ratio expansion: its raw metric components grow like
    e^(2r), so the tensor contraction loses all precision at large radius
    while the adapted split stays exact.  Passing a precomputed tensor
    forces the contraction route.
    """
    g = metric_tensor(pl.point)
    nu = pl.u / math.sqrt(float(pl.u @ g @ pl.u))
    nv = pl.v / math.sqrt(float(pl.v @ g @ pl.v))
    denom = _gram(g, nu, nv)
    if not denom > _PLANE_TOL:
        raise DegeneratePlaneError(
            f"vectors are parallel to within tolerance (gram {denom:g})")
    chart = pl.point.chart
    if chart.kind == CARTESIAN and rie is None:
        r = pl.point.radius
        ratios = chart.profile.curvature_ratios(r)
        if r < R_MIN:
            # every axis point of the three variants is isotropic
            return ratios[0]
        return sectional_from_adapted(
            chart.profile, r,
            adapted_components(pl.point, nu),
            adapted_components(pl.point, nv))
    if rie is None:
        rie = riemann(pl.point)
    num = float(np.einsum("ijkl,i,j,k,l", rie, nu, nv, nu, nv))
    return num / denom


# ---------------------------------------------------------------------------
# closed-form curvature components of the 4d model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureComponents:
    """The six independent curvature components of the 4d model chart,
    indexed by coordinate pairs: R_(theta r theta r), R_(phi r phi r),
    R_(z r z r), R_(phi theta phi theta), R_(theta z theta z),
    R_(phi z phi z)."""

    theta_r: float
    phi_r: float
    z_r: float
    phi_theta: float
    theta_z: float
    phi_z: float

    def as_tuple(self):
        return (self.theta_r, self.phi_r, self.z_r,
                self.phi_theta, self.theta_z, self.phi_z)

    @property
    def max_value(self) -> float:
        return max(self.as_tuple())


def curvature_components_closed_form(profile: WarpingProfile, r: float,
                                     theta: float) -> CurvatureComponents:
    """Evaluate the six nonzero components from profile derivatives:

        R_(theta r theta r) = -sigma sigma''
        R_(phi r phi r)     = -sigma sigma'' sin^2(theta)
        R_(z r z r)         = -tau tau''
        R_(phi theta phi theta) = (1 - sigma'^2) sigma^2 sin^2(theta)
        R_(theta z theta z) = -sigma sigma' tau tau'
        R_(phi z phi z)     = -sigma sigma' tau tau' sin^2(theta)
    """
    if r <= 0.0:
        raise ValueError("r must be positive")
    if not 0.0 < theta < math.pi:
        raise ValueError("theta must lie in (0, pi)")
    sg, sgp, sgpp, tu, tup, tupp = profile.sigma_tau(r)
    st2 = math.sin(theta) ** 2
    _, k2, _, _ = profile.curvature_ratios(r)
    theta_r = -sg * sgpp
    z_r = -tu * tupp
    # (1 - sigma'^2) sigma^2 via the cancellation-free ratio k2
    phi_theta = k2 * sg ** 4 * st2
    theta_z = -sg * sgp * tu * tup
    return CurvatureComponents(
        theta_r=theta_r,
        phi_r=theta_r * st2,
        z_r=z_r,
        phi_theta=phi_theta,
        theta_z=theta_z,
        phi_z=theta_z * st2,
    )


def max_plane_curvature(profile: WarpingProfile, r: float) -> float:
    """Largest sectional curvature over all tangent 2-planes at radius r.

    Every plane's curvature is a convex combination of the four principal
    ratios, so the maximum over planes equals the largest ratio.
    """
    return max(profile.curvature_ratios(r))


def adapted_components_raw(chart: MetricChart, coords: np.ndarray,
                           vec: np.ndarray):
    """adapted_components without ChartPoint plumbing (hot-loop variant)."""
    r = chart.radius_of(coords)
    sg, _, _, tu, _, _ = chart.profile.sigma_tau(r)
    vec = np.asarray(vec, dtype=float)
    if chart.kind == CARTESIAN:
        d = chart.block_dim
        x = coords[:d]
        if r <= 0.0:
            raise ChartDomainError("adapted frame undefined on the axis")
        xhat = x / r
        vr = float(vec[:d] @ xhat)
        perp = vec[:d] - vr * xhat
        return vr, (sg / r) * perp, float(vec[d]) * tu
    if chart.kind == FOUR_D:
        st = math.sin(coords[1])
        a_s = np.array([vec[1] * sg, vec[2] * sg * st])
        return float(vec[0]), a_s, float(vec[3]) * tu
    d = chart.block_dim
    scale = sg
    a_s = np.zeros(d - 1)
    for i in range(d - 1):
        a_s[i] = vec[1 + i] * scale
        if i < d - 2:
            scale *= math.sin(coords[1 + i])
    return float(vec[0]), a_s, float(vec[d]) * tu


def adapted_components(point: ChartPoint, vec: np.ndarray):
    """Split a tangent vector into radial / sphere / axis parts measured in
    an orthonormal frame adapted to the warped splitting.

    Returns (a_r, a_s, a_z) with a_s a Euclidean vector; only |a_s| and
    inner products of sphere parts are frame-independent quantities.
    """
    return adapted_components_raw(point.chart, point.coords, vec)


def curvature_numerator(profile: WarpingProfile, r: float,
                        u_parts, v_parts) -> float:
    """R(u, v, u, v) from adapted components via the principal-ratio
    expansion (the factor multiplying each ratio is the squared area of the
    plane's shadow on the corresponding coordinate 2-plane)."""
    k1, k2, k3, k4 = profile.curvature_ratios(r)
    ur, us, uz = u_parts
    vr, vs, vz = v_parts
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    w1 = float(np.sum((ur * vs - vr * us) ** 2))
    w2 = float(np.sum(us * us) * np.sum(vs * vs) - np.sum(us * vs) ** 2)
    w3 = (ur * vz - vr * uz) ** 2
    w4 = float(np.sum((uz * vs - vz * us) ** 2))
    return k1 * w1 + k2 * w2 + k3 * w3 + k4 * w4


def sectional_from_adapted(profile: WarpingProfile, r: float,
                           u_parts, v_parts) -> float:
    """Sectional curvature from adapted components via the principal-ratio
    expansion; equals the chart computation for the same plane."""
    ur, us, uz = u_parts
    vr, vs, vz = v_parts
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    uu = ur * ur + float(us @ us) + uz * uz
    vv = vr * vr + float(vs @ vs) + vz * vz
    uv = ur * vr + float(us @ vs) + uz * vz
    denom = uu * vv - uv * uv
    if not denom > _PLANE_TOL:
        raise DegeneratePlaneError("degenerate plane")
    return curvature_numerator(profile, r, u_parts, v_parts) / denom


# ---------------------------------------------------------------------------
# chart transforms
# ---------------------------------------------------------------------------

def _spherical_to_block(r, angles):
    """Hyperspherical (r, angles) -> block coordinates; Dual-safe."""
    d = len(angles) + 1
    out = []
    prefix = r
    for i in range(d - 1):
        out.append(prefix * dn.cos(angles[i]))
        prefix = prefix * dn.sin(angles[i])
    out.append(prefix)
    return out


def polar_to_cartesian(point: ChartPoint, velocity: np.ndarray | None = None):
    """Convert a polar-chart point (and optional velocity) to the Cartesian
    chart of the same warped space."""
    chart = point.chart
    if chart.kind != POLAR:
        raise ChartDomainError("polar_to_cartesian needs a polar point")
    target = MetricChart.cartesian(chart.profile, chart.n)
    d = chart.block_dim
    coords = point.coords
    x = _spherical_to_block(coords[0], list(coords[1:d]))
    out = np.array([dn.value(c) for c in x] + [coords[d]])
    new_point = ChartPoint(out, target)
    if velocity is None:
        return new_point
    jac = _polar_jacobian(chart, coords)
    return new_point, jac @ np.asarray(velocity, dtype=float)


def _polar_jacobian(chart: MetricChart, coords: np.ndarray) -> np.ndarray:
    """Jacobian of the polar -> Cartesian coordinate map."""
    d = chart.block_dim
    dim = chart.dim
    jac = np.zeros((dim, dim))
    for k in range(d):
        args = [dn.lift(coords[j], 1.0 if j == k else 0.0) for j in range(d)]
        col = _spherical_to_block(args[0], args[1:])
        for i in range(d):
            jac[i, k] = dn.value(col[i].dot if isinstance(col[i], dn.Dual)
                                 else 0.0)
    jac[d, d] = 1.0
    return jac


def cartesian_to_polar(point: ChartPoint, velocity: np.ndarray | None = None):
    """Convert a Cartesian-chart point (and optional velocity) to polar."""
    chart = point.chart
    if chart.kind != CARTESIAN:
        raise ChartDomainError("cartesian_to_polar needs a cartesian point")
    target = MetricChart.polar(chart.profile, chart.n)
    d = chart.block_dim
    x = point.coords[:d]
    r = float(np.linalg.norm(x))
    if r < R_MIN:
        raise ChartDomainError("point too close to the axis for polar")
    angles = []
    for i in range(d - 1):
        tail = float(np.linalg.norm(x[i + 1:]))
        angles.append(math.atan2(tail, float(x[i])) if i < d - 2
                      else math.atan2(float(x[i + 1]), float(x[i])))
    coords = np.array([r] + angles + [point.coords[d]])
    new_point = target.point(coords)
    if velocity is None:
        return new_point
    jac = _polar_jacobian(target, coords)
    vel = np.linalg.solve(jac, np.asarray(velocity, dtype=float))
    return new_point, vel


# ---------------------------------------------------------------------------
# randomized nonpositivity scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds must have equal length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box has lo > hi")


@dataclass(frozen=True)
class ScanReport:
    samples: int
    seed: int
    max_curvature: float
    max_coords: tuple
    min_curvature: float
    min_coords: tuple


def default_region(chart: MetricChart, r_max: float | None = None) -> Box:
    """A sampling box respecting the chart's valid region."""
    if r_max is None:
        if chart.profile.variant == "interpolated":
            r_max = chart.profile.matching_radius + 6.0
        else:
            r_max = 5.0
    if chart.kind == CARTESIAN:
        half = r_max / math.sqrt(chart.block_dim)
        lo = [-half] * chart.block_dim + [-2.0]
        hi = [half] * chart.block_dim + [2.0]
        return Box(tuple(lo), tuple(hi))
    pad = 0.05
    lo, hi = [1e-3], [r_max]
    n_angles = chart.block_dim - 1
    for i in range(n_angles):
        last = i == n_angles - 1
        lo.append(0.0 if last else pad)
        hi.append(2.0 * math.pi if last else math.pi - pad)
    if chart.kind == FOUR_D:
        lo[1], hi[1] = pad, math.pi - pad   # theta in (0, pi)
        lo[2], hi[2] = 0.0, 2.0 * math.pi
    lo.append(-2.0)
    hi.append(2.0)
    return Box(tuple(lo), tuple(hi))


def _sample_curvature(chart: MetricChart, region: Box, seed: int,
                      index: int) -> tuple[float, tuple]:
    rng = sample_stream(seed, index)
    lo = np.asarray(region.lo)
    hi = np.asarray(region.hi)
    dim = chart.dim
    for _ in range(64):
        coords = lo + rng.random(dim) * (hi - lo)
        point = ChartPoint(coords, chart)
        g = metric_tensor(point)
        u = rng.standard_normal(dim)
        v = rng.standard_normal(dim)
        u = u / math.sqrt(float(u @ g @ u))
        v = v - float(u @ g @ v) * u
        vnorm2 = float(v @ g @ v)
        if vnorm2 < _PLANE_TOL:
            continue
        v = v / math.sqrt(vnorm2)
        k_val = sectional_curvature(plane(point, u, v))
        return k_val, tuple(coords)
    raise DegeneratePlaneError("could not draw an independent plane")


def scan_nonpositive(chart: MetricChart, samples: int, seed: int,
                     region: Box | None = None) -> ScanReport:
    """Sample random (point, plane) pairs and report curvature extremes.

    Points are uniform in the region box; planes come from two
    standard-normal tangent vectors orthonormalized in the metric.  Each
    sample index has its own counter-based stream, so the report is
    deterministic for a given seed regardless of scheduling.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if region is None:
        region = default_region(chart)
    if len(region.lo) != chart.dim:
        raise ValueError("region dimension does not match chart")

    def run_range(start: int, stop: int):
        best_max = (-math.inf, None)
        best_min = (math.inf, None)
        for i in range(start, stop):
            k_val, coords = _sample_curvature(chart, region, seed, i)
            if k_val > best_max[0]:
                best_max = (k_val, coords)
            if k_val < best_min[0]:
                best_min = (k_val, coords)
        return best_max, best_min

    workers = min(worker_count(), samples)
    if workers <= 1:
        best_max, best_min = run_range(0, samples)
    else:
        bounds = np.linspace(0, samples, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: run_range(*ab),
                                  zip(bounds[:-1], bounds[1:])))
        best_max = max((p[0] for p in parts), key=lambda t: t[0])
        best_min = min((p[1] for p in parts), key=lambda t: t[0])
    return ScanReport(samples=samples, seed=seed,
                      max_curvature=best_max[0], max_coords=best_max[1],
                      min_curvature=best_min[0], min_coords=best_min[1])
