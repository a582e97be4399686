"""Geodesic flow, parallel transport, and radial comparison operators.

Everything here integrates ordinary differential equations along curves in
one of the charts from :mod:`fatflat.geometry` with a fixed-step classical
fourth-order Runge-Kutta scheme.  A fixed step keeps runs exactly
reproducible: the sample grid, and therefore every downstream reduction, is
a pure function of (chart, initial state, duration, step).

Chart policy: the Cartesian chart is regular across the axis and is the
right place to integrate whenever an orbit may approach radius zero; the
diagonal charts are cheaper and better conditioned at large radius.  The
integrator raises :class:`ChartExitError` when a trajectory leaves the
region where its chart is trustworthy so the caller can switch charts and
resume (see :func:`switch_chart` and :func:`preferred_kind`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import (
    CARTESIAN,
    FOUR_D,
    POLAR,
    ChartPoint,
    MetricChart,
    adapted_components_raw,
    axis_coefficients,
    cartesian_to_polar,
    christoffel,
    curvature_numerator,
    polar_to_cartesian,
)
from .profiles import WarpingProfile

__all__ = [
    "PhaseState",
    "GeodesicPath",
    "TransportResult",
    "RiccatiResult",
    "ChartExitError",
    "RiccatiBlowupError",
    "DEFAULT_STEP",
    "POLAR_EXIT_RADIUS",
    "ANGLE_EXIT_MARGIN",
    "integrate_geodesic",
    "parallel_transport",
    "riccati_expansion",
    "kinetic_energy",
    "normalize_velocity",
    "switch_chart",
    "preferred_kind",
]

DEFAULT_STEP = 1e-3

# Diagonal charts are abandoned before their coordinate singularities start
# to poison the integrator: Christoffel entries grow like 1/r near the axis
# and like cot(theta) near the angular poles.
POLAR_EXIT_RADIUS = 1e-2
ANGLE_EXIT_MARGIN = 1e-3


class ChartExitError(RuntimeError):
    """A trajectory left the valid region of its chart.

    Carries the last in-chart sample (and, for plain geodesic runs, the
    partial path recorded so far) so the caller can transform the state to
    another chart and resume integration there.
    """

    def __init__(self, message: str, time: float, state: "PhaseState",
                 partial: Optional["GeodesicPath"] = None):
        super().__init__(message)
        self.time = time
        self.state = state
        self.partial = partial


class RiccatiBlowupError(RuntimeError):
    """The comparison operator left the resolvable range of the step size."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass
class PhaseState:
    """Position and velocity in a single chart's coordinates."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).copy()
        self.velocity = np.asarray(self.velocity, dtype=float).copy()
        if self.position.shape != self.velocity.shape:
            raise ValueError("position and velocity must have equal shapes")

    def copy(self) -> "PhaseState":
        return PhaseState(self.position, self.velocity)

    def reversed(self) -> "PhaseState":
        return PhaseState(self.position, -self.velocity)


@dataclass
class GeodesicPath:
    """Recorded samples of one geodesic integration run."""

    chart: MetricChart
    step: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def samples(self) -> List[Tuple[float, PhaseState]]:
        return [
            (float(t), PhaseState(p, v))
            for t, p, v in zip(self.times, self.positions, self.velocities)
        ]

    def state(self, index: int = -1) -> PhaseState:
        return PhaseState(self.positions[index], self.velocities[index])

    def point(self, index: int = -1) -> ChartPoint:
        return self.chart.point(self.positions[index])

    def radii(self) -> np.ndarray:
        if self.chart.kind == CARTESIAN:
            d = self.chart.block_dim
            return np.linalg.norm(self.positions[:, :d], axis=1)
        return self.positions[:, 0].copy()

    def energies(self) -> np.ndarray:
        """g(v, v) at every recorded sample (constant along true geodesics)."""
        return _energy_series(self.chart, self.positions, self.velocities)


@dataclass
class TransportResult:
    """Parallel transport of a frame along a geodesic."""

    vectors: np.ndarray  # rows are the transported vectors at the endpoint
    end_state: PhaseState
    orthogonality_defect: float  # max |Gram(end) - Gram(start)| entrywise


@dataclass
class RiccatiResult:
    """Radial comparison operator U(t) integrated along a geodesic."""

    u_final: np.ndarray
    times: np.ndarray
    traces: np.ndarray
    end_state: PhaseState


# ---------------------------------------------------------------------------
# metric evaluation helpers


def kinetic_energy(chart: MetricChart, position, velocity) -> float:
    """g(v, v) at a single phase-space point."""
    pos = np.asarray(position, dtype=float)[None, :]
    vel = np.asarray(velocity, dtype=float)[None, :]
    return float(_energy_series(chart, pos, vel)[0])


def normalize_velocity(chart: MetricChart, position, velocity) -> np.ndarray:
    """Scale a velocity to unit metric speed."""
    vel = np.asarray(velocity, dtype=float)
    e = kinetic_energy(chart, position, vel)
    if e <= 0.0:
        raise ValueError("cannot normalize a zero velocity")
    return vel / math.sqrt(e)


def _warp_factors(profile: WarpingProfile, radii: np.ndarray):
    sg, _, _, tu, _, _ = profile.sigma_tau_many(radii)
    return sg, tu


def _energy_series(chart: MetricChart, positions: np.ndarray,
                   velocities: np.ndarray) -> np.ndarray:
    """Vectorized g(v, v) along a sample array."""
    profile = chart.profile
    if chart.kind == CARTESIAN:
        d = chart.block_dim
        x = positions[:, :d]
        vb = velocities[:, :d]
        vz = velocities[:, d]
        r = np.linalg.norm(x, axis=1)
        sg, tu = _warp_factors(profile, r)
        # A q + B s^2 == A (q - (s/r)^2) + (s/r)^2 because A + B r^2 = 1;
        # the right-hand side stays accurate at radii where B ~ -A/r^2.
        safe = np.where(r > 0.0, r, 1.0)
        ratio = np.where(r > 0.0, sg / safe, 1.0)
        s_over_r = np.einsum("ij,ij->i", x, vb) / safe
        s_over_r = np.where(r > 0.0, s_over_r, 0.0)
        q = np.einsum("ij,ij->i", vb, vb)
        perp = np.maximum(q - s_over_r ** 2, 0.0)
        # grouped as (warp * rate)^2 so the warp factor alone never overflows
        return (ratio * np.sqrt(perp)) ** 2 + s_over_r ** 2 + (tu * vz) ** 2
    r = positions[:, 0]
    sg, tu = _warp_factors(profile, r)
    if chart.kind == FOUR_D:
        theta = positions[:, 1]
        ang = velocities[:, 1] ** 2 + (np.sin(theta) * velocities[:, 2]) ** 2
        return (velocities[:, 0] ** 2 + (sg * np.sqrt(ang)) ** 2
                + (tu * velocities[:, 3]) ** 2)
    d = chart.block_dim
    ang = np.zeros(len(positions))
    scale = np.ones(len(positions))
    for i in range(d - 1):
        ang += scale * velocities[:, 1 + i] ** 2
        if i < d - 2:
            scale = scale * np.sin(positions[:, 1 + i]) ** 2
    return (velocities[:, 0] ** 2 + (sg * np.sqrt(ang)) ** 2
            + (tu * velocities[:, d]) ** 2)


# ---------------------------------------------------------------------------
# acceleration fields


def _accel_cartesian(chart: MetricChart) -> Callable:
    profile = chart.profile
    d = chart.block_dim

    def acc(pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
        x = pos[:d]
        vb = vel[:d]
        vz = vel[d]
        r = math.sqrt(float(x @ x))
        a, b, apr, bpr, tau2, tpr = axis_coefficients(profile, r)
        s = float(x @ vb)
        q = float(vb @ vb)
        c = bpr * s * s + 2.0 * b * q - apr * q - tpr * vz * vz
        w = (2.0 * apr * s) * vb + c * x
        xw = float(x @ w)
        out = np.empty(d + 1)
        out[:d] = -(w - (b * xw) * x) / (2.0 * a)
        out[d] = -tpr * s * vz / tau2
        return out

    return acc


def _accel_polar3(chart: MetricChart) -> Callable:
    profile = chart.profile

    def acc(pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
        r = pos[0]
        vr = vel[0]
        vt = vel[1]
        vz = vel[2]
        sg, dsg, _, tu, dtu, _ = profile.sigma_tau(r)
        # grouped as (warp * rate) products: the factors overflow/underflow
        # separately at large radius while the products stay ordinary
        return np.array([
            (sg * vt) * (dsg * vt) + (tu * vz) * (dtu * vz),
            -2.0 * (dsg / sg) * vr * vt,
            -2.0 * (dtu / tu) * vr * vz,
        ])

    return acc


def _accel_generic(chart: MetricChart) -> Callable:
    def acc(pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
        gamma = christoffel(chart.point(pos))
        return -np.einsum("ijk,j,k->i", gamma, vel, vel)

    return acc


def _acceleration(chart: MetricChart) -> Callable:
    if chart.kind == CARTESIAN:
        return _accel_cartesian(chart)
    if chart.kind == POLAR and chart.n == 1:
        return _accel_polar3(chart)
    return _accel_generic(chart)


def _exit_check(chart: MetricChart):
    """Returns a predicate giving a reason string when a chart must be left."""
    if chart.kind == CARTESIAN:
        return lambda pos: None
    if chart.kind == POLAR and chart.n == 1:
        def check3(pos):
            if pos[0] < POLAR_EXIT_RADIUS:
                return "radius below the diagonal-chart floor"
            return None
        return check3
    # remaining diagonal charts also carry polar angles with poles at 0, pi
    n_angles = (1 if chart.kind == FOUR_D else chart.block_dim - 2)

    def check(pos):
        if pos[0] < POLAR_EXIT_RADIUS:
            return "radius below the diagonal-chart floor"
        for i in range(n_angles):
            th = pos[1 + i]
            if th < ANGLE_EXIT_MARGIN or th > math.pi - ANGLE_EXIT_MARGIN:
                return "polar angle reached a coordinate pole"
        return None

    return check


def _step_count(duration: float, step: float) -> Tuple[int, float]:
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    if step <= 0.0:
        raise ValueError("step must be positive")
    n = max(1, int(round(duration / step)))
    return n, duration / n


# ---------------------------------------------------------------------------
# geodesic integration


def _run_scalar_polar3(chart: MetricChart, state: PhaseState, n_steps: int,
                       h: float, record_every: int) -> GeodesicPath:
    """RK4 loop for the 3-coordinate diagonal chart written in plain floats;
    equivalent to the generic loop but without per-stage array traffic."""
    sigma_tau = chart.profile.sigma_tau
    r, th, z = (float(c) for c in state.position)
    vr, vt, vz = (float(c) for c in state.velocity)
    times = [0.0]
    rows_p = [(r, th, z)]
    rows_v = [(vr, vt, vz)]
    half = 0.5 * h
    sixth = h / 6.0

    def acc(r_, vr_, vt_, vz_):
        sg, dsg, _, tu, dtu, _ = sigma_tau(r_)
        # grouped so huge warp factors meet tiny rates before multiplying
        return ((sg * vt_) * (dsg * vt_) + (tu * vz_) * (dtu * vz_),
                -2.0 * (dsg / sg) * vr_ * vt_,
                -2.0 * (dtu / tu) * vr_ * vz_)

    def partial_path():
        return GeodesicPath(chart, h, np.array(times), np.array(rows_p),
                            np.array(rows_v))

    for i in range(n_steps):
        if r < POLAR_EXIT_RADIUS:
            raise ChartExitError("radius below the diagonal-chart floor",
                                 i * h, PhaseState((r, th, z), (vr, vt, vz)),
                                 partial_path())
        ar1, at1, az1 = acc(r, vr, vt, vz)
        vr2 = vr + half * ar1
        vt2 = vt + half * at1
        vz2 = vz + half * az1
        ar2, at2, az2 = acc(r + half * vr, vr2, vt2, vz2)
        vr3 = vr + half * ar2
        vt3 = vt + half * at2
        vz3 = vz + half * az2
        ar3, at3, az3 = acc(r + half * vr2, vr3, vt3, vz3)
        vr4 = vr + h * ar3
        vt4 = vt + h * at3
        vz4 = vz + h * az3
        ar4, at4, az4 = acc(r + h * vr3, vr4, vt4, vz4)
        r += sixth * (vr + 2.0 * (vr2 + vr3) + vr4)
        th += sixth * (vt + 2.0 * (vt2 + vt3) + vt4)
        z += sixth * (vz + 2.0 * (vz2 + vz3) + vz4)
        vr += sixth * (ar1 + 2.0 * (ar2 + ar3) + ar4)
        vt += sixth * (at1 + 2.0 * (at2 + at3) + at4)
        vz += sixth * (az1 + 2.0 * (az2 + az3) + az4)
        if not (math.isfinite(r) and math.isfinite(vr) and math.isfinite(vt)
                and math.isfinite(vz)):
            raise ChartExitError("non-finite state", (i + 1) * h,
                                 PhaseState(rows_p[-1], rows_v[-1]),
                                 partial_path())
        if (i + 1) % record_every == 0 or i + 1 == n_steps:
            times.append((i + 1) * h)
            rows_p.append((r, th, z))
            rows_v.append((vr, vt, vz))

    if r < POLAR_EXIT_RADIUS:
        raise ChartExitError("radius below the diagonal-chart floor",
                             n_steps * h, PhaseState((r, th, z), (vr, vt, vz)),
                             partial_path())
    return GeodesicPath(chart, h, np.array(times), np.array(rows_p),
                        np.array(rows_v))


def integrate_geodesic(chart: MetricChart, state: PhaseState, duration: float,
                       step: float = DEFAULT_STEP,
                       record_every: int = 1) -> GeodesicPath:
    """Integrate the geodesic equation with classical RK4 at a fixed step.

    Records every ``record_every``-th node (plus the final node).  Raises
    :class:`ChartExitError` when the orbit leaves the chart's trusted
    region, with the last good sample attached.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    chart.point(state.position)  # validates chart membership
    n_steps, h = _step_count(duration, step)
    if chart.kind == POLAR and chart.n == 1:
        return _run_scalar_polar3(chart, state, n_steps, h, record_every)
    acc = _acceleration(chart)
    check = _exit_check(chart)

    pos = state.position.copy()
    vel = state.velocity.copy()
    times = [0.0]
    positions = [pos.copy()]
    velocities = [vel.copy()]

    half = 0.5 * h
    sixth = h / 6.0

    def partial_path():
        return GeodesicPath(chart, h, np.array(times), np.array(positions),
                            np.array(velocities))

    for i in range(n_steps):
        reason = check(pos)
        if reason is not None:
            raise ChartExitError(reason, i * h, PhaseState(pos, vel),
                                 partial_path())
        a1 = acc(pos, vel)
        v2 = vel + half * a1
        a2 = acc(pos + half * vel, v2)
        v3 = vel + half * a2
        a3 = acc(pos + half * v2, v3)
        v4 = vel + h * a3
        a4 = acc(pos + h * v3, v4)
        pos = pos + sixth * (vel + 2.0 * (v2 + v3) + v4)
        vel = vel + sixth * (a1 + 2.0 * (a2 + a3) + a4)
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(vel)):
            raise ChartExitError("non-finite state", (i + 1) * h,
                                 PhaseState(positions[-1], velocities[-1]),
                                 partial_path())
        if (i + 1) % record_every == 0 or i + 1 == n_steps:
            times.append((i + 1) * h)
            positions.append(pos.copy())
            velocities.append(vel.copy())

    reason = check(pos)
    if reason is not None:
        raise ChartExitError(reason, n_steps * h, PhaseState(pos, vel),
                             partial_path())
    return GeodesicPath(chart, h, np.array(times), np.array(positions),
                        np.array(velocities))


def switch_chart(chart: MetricChart, state: PhaseState,
                 target: MetricChart) -> PhaseState:
    """Express a phase-space state in another chart of the same metric."""
    if chart.profile is not target.profile or chart.n != target.n:
        raise ValueError("charts describe different spaces")
    if chart.kind == target.kind:
        return state.copy()
    if chart.kind == POLAR and target.kind == CARTESIAN:
        pt, vel = polar_to_cartesian(chart.point(state.position),
                                     state.velocity)
        return PhaseState(pt.coords, vel)
    if chart.kind == CARTESIAN and target.kind == POLAR:
        pt, vel = cartesian_to_polar(chart.point(state.position),
                                     state.velocity)
        return PhaseState(pt.coords, vel)
    raise ValueError("unsupported chart switch "
                     f"{chart.kind!r} -> {target.kind!r}")


def preferred_kind(radius: float) -> str:
    """Chart choice policy: regular chart near the axis, diagonal otherwise."""
    return CARTESIAN if radius < POLAR_EXIT_RADIUS else POLAR


# ---------------------------------------------------------------------------
# parallel transport


def _gram(chart: MetricChart, position: np.ndarray,
          vectors: np.ndarray) -> np.ndarray:
    m = len(vectors)
    g = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            val = kinetic_energy(chart, position, vectors[i] + vectors[j])
            val -= kinetic_energy(chart, position, vectors[i] - vectors[j])
            g[i, j] = g[j, i] = 0.25 * val
    return g


def parallel_transport(path: GeodesicPath, frame: Sequence[np.ndarray],
                       step: Optional[float] = None) -> TransportResult:
    """Parallel-transport ``frame`` (based at the path start) to its end.

    The frame rides along the same RK4 stages as the base geodesic, which
    is re-integrated from the path's initial sample at the path's step (or
    ``step`` when given); the transport right-hand side uses the
    polarization identity G(v, w) = (G(v+w, v+w) - G(v-w, v-w)) / 4 of the
    quadratic geodesic-acceleration form, so no Christoffel assembly is
    needed on charts with a fast acceleration path.
    """
    chart = path.chart
    state = path.state(0)
    duration = path.duration
    if step is None:
        step = path.step
    chart.point(state.position)
    n_steps, h = _step_count(duration, step)
    acc = _acceleration(chart)
    check = _exit_check(chart)

    w0 = np.array([np.asarray(w, dtype=float) for w in frame])
    if w0.ndim != 2 or w0.shape[1] != chart.dim:
        raise ValueError("frame must be a list of tangent vectors")
    gram0 = _gram(chart, state.position, w0)

    def dw(pos, vel, w_rows):
        out = np.empty_like(w_rows)
        for i, w in enumerate(w_rows):
            out[i] = 0.25 * (acc(pos, vel + w) - acc(pos, vel - w))
        return out

    pos = state.position.copy()
    vel = state.velocity.copy()
    w = w0.copy()
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n_steps):
        reason = check(pos)
        if reason is not None:
            raise ChartExitError(reason, i * h, PhaseState(pos, vel))
        a1 = acc(pos, vel)
        dw1 = dw(pos, vel, w)
        p2 = pos + half * vel
        v2 = vel + half * a1
        a2 = acc(p2, v2)
        dw2 = dw(p2, v2, w + half * dw1)
        p3 = pos + half * v2
        v3 = vel + half * a2
        a3 = acc(p3, v3)
        dw3 = dw(p3, v3, w + half * dw2)
        p4 = pos + h * v3
        v4 = vel + h * a3
        a4 = acc(p4, v4)
        dw4 = dw(p4, v4, w + h * dw3)
        pos = pos + sixth * (vel + 2.0 * (v2 + v3) + v4)
        vel = vel + sixth * (a1 + 2.0 * (a2 + a3) + a4)
        w = w + sixth * (dw1 + 2.0 * (dw2 + dw3) + dw4)

    reason = check(pos)
    if reason is not None:
        raise ChartExitError(reason, n_steps * h, PhaseState(pos, vel))
    gram1 = _gram(chart, pos, w)
    defect = float(np.max(np.abs(gram1 - gram0)))
    return TransportResult(w, PhaseState(pos, vel), defect)


# ---------------------------------------------------------------------------
# radial comparison (Riccati) operator


def _normal_frame(chart: MetricChart, position: np.ndarray,
                  velocity: np.ndarray) -> np.ndarray:
    """Metric-orthonormal basis of the normal space of ``velocity``."""
    dim = chart.dim

    def inner(a, b):
        return 0.25 * (kinetic_energy(chart, position, a + b)
                       - kinetic_energy(chart, position, a - b))

    vnorm = inner(velocity, velocity)
    if vnorm <= 0.0:
        raise ValueError("velocity must be nonzero")
    basis = [velocity / math.sqrt(vnorm)]
    for k in range(dim):
        cand = np.zeros(dim)
        cand[k] = 1.0
        for b in basis:
            cand = cand - inner(cand, b) * b
        nrm = inner(cand, cand)
        if nrm > 1e-12:
            basis.append(cand / math.sqrt(nrm))
        if len(basis) == dim:
            break
    if len(basis) != dim:
        raise RuntimeError("failed to complete an orthonormal frame")
    return np.array(basis[1:])


def _gershgorin_upper(u: np.ndarray) -> float:
    """Cheap upper bound for the largest eigenvalue of a symmetric matrix;
    the exact eigvalsh only runs when this bound crosses the threshold."""
    diag = np.diag(u)
    radii = np.sum(np.abs(u), axis=1) - np.abs(diag)
    return float(np.max(diag + radii))


def riccati_expansion(path: GeodesicPath, c0: float = 1.0,
                      duration: Optional[float] = None,
                      step: Optional[float] = None,
                      record_every: int = 100) -> RiccatiResult:
    """Integrate U' + U^2 + M(t) = 0 with U(0) = c0 * I along a geodesic.

    The geodesic is re-integrated from the path's initial sample (defaults:
    the path's own step and duration).  M(t) is the curvature operator
    w -> R(w, v, w, v) restricted to a parallel orthonormal frame of the
    velocity's normal space.  Raises :class:`RiccatiBlowupError` as soon as
    an eigenvalue of U exceeds the reciprocal step, after which the
    fixed-step scheme cannot resolve the solution any further.
    """
    chart = path.chart
    state = path.state(0)
    if duration is None:
        duration = path.duration
    if step is None:
        step = path.step
    chart.point(state.position)
    if c0 <= 0.0:
        raise ValueError("c0 must be positive")
    n_steps, h = _step_count(duration, step)
    acc = _acceleration(chart)
    check = _exit_check(chart)
    profile = chart.profile

    pos = state.position.copy()
    vel = state.velocity.copy()
    frame = _normal_frame(chart, pos, vel)
    m = len(frame)
    u = c0 * np.eye(m)

    def dw(pos_, vel_, w_rows):
        out = np.empty_like(w_rows)
        for i, wv in enumerate(w_rows):
            out[i] = 0.25 * (acc(pos_, vel_ + wv) - acc(pos_, vel_ - wv))
        return out

    def curvature_operator(pos_, vel_, w_rows):
        r = chart.radius_of(pos_)
        if all(k == 0.0 for k in profile.curvature_ratios(r)):
            return np.zeros((m, m))
        parts_v = adapted_components_raw(chart, pos_, vel_)
        parts_w = [adapted_components_raw(chart, pos_, wv) for wv in w_rows]

        def q(parts):
            return curvature_numerator(profile, r, parts, parts_v)

        mat = np.empty((m, m))
        for i in range(m):
            mat[i, i] = q(parts_w[i])
        for i in range(m):
            ri, si, zi = parts_w[i]
            for j in range(i + 1, m):
                rj, sj, zj = parts_w[j]
                plus = q((ri + rj, si + sj, zi + zj))
                minus = q((ri - rj, si - sj, zi - zj))
                mat[i, j] = mat[j, i] = 0.25 * (plus - minus)
        return mat

    def du(pos_, vel_, w_rows, u_mat):
        return -(u_mat @ u_mat) - curvature_operator(pos_, vel_, w_rows)

    max_eig_allowed = 1.0 / h
    rec_times = [0.0]
    rec_traces = [float(np.trace(u))]
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n_steps):
        reason = check(pos)
        if reason is not None:
            raise ChartExitError(reason, i * h, PhaseState(pos, vel))
        if _gershgorin_upper(u) > max_eig_allowed:
            exact = float(np.max(np.linalg.eigvalsh(u)))
            if exact > max_eig_allowed:
                raise RiccatiBlowupError(
                    "comparison operator eigenvalue exceeded 1/step", i * h)
        a1 = acc(pos, vel)
        dw1 = dw(pos, vel, frame)
        du1 = du(pos, vel, frame, u)
        p2 = pos + half * vel
        v2 = vel + half * a1
        a2 = acc(p2, v2)
        w2 = frame + half * dw1
        u2 = u + half * du1
        dw2 = dw(p2, v2, w2)
        du2 = du(p2, v2, w2, u2)
        p3 = pos + half * v2
        v3 = vel + half * a2
        a3 = acc(p3, v3)
        w3 = frame + half * dw2
        u3 = u + half * du2
        dw3 = dw(p3, v3, w3)
        du3 = du(p3, v3, w3, u3)
        p4 = pos + h * v3
        v4 = vel + h * a3
        a4 = acc(p4, v4)
        w4 = frame + h * dw3
        u4 = u + h * du3
        dw4 = dw(p4, v4, w4)
        du4 = du(p4, v4, w4, u4)
        pos = pos + sixth * (vel + 2.0 * (v2 + v3) + v4)
        vel = vel + sixth * (a1 + 2.0 * (a2 + a3) + a4)
        frame = frame + sixth * (dw1 + 2.0 * (dw2 + dw3) + dw4)
        u = u + sixth * (du1 + 2.0 * (du2 + du3) + du4)
        u = 0.5 * (u + u.T)
        if not np.all(np.isfinite(u)):
            raise RiccatiBlowupError("comparison operator became non-finite",
                                     (i + 1) * h)
        if (i + 1) % record_every == 0 or i + 1 == n_steps:
            rec_times.append((i + 1) * h)
            rec_traces.append(float(np.trace(u)))

    return RiccatiResult(u, np.array(rec_times), np.array(rec_traces),
                         PhaseState(pos, vel))
