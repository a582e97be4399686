"""Flat-region utilities: point-set distance, overlap volumes, strip thickening.

Three groups of tools live here:

* Hausdorff distance between finite point clouds in ``R^l``.
* Monte-Carlo volume of a convex polytope and of its union with an
  isometric copy, with deterministic per-sample randomness.
* Exact planar construction of a long thin box inside the union of two
  nearly parallel strips, with the guaranteed cross-section gain.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .rng import sample_stream, worker_count

__all__ = [
    "PointCloud",
    "Isometry",
    "ConvexBody",
    "FramedStrip2D",
    "FlatBox2D",
    "UnionVolumeReport",
    "DegenerateBodyError",
    "ParallelStripsError",
    "hausdorff_distance",
    "union_volume",
    "thicken_strips",
    "DEFAULT_SAMPLES",
]

DEFAULT_SAMPLES = 10**6

# Fixed Monte-Carlo chunk: sample i always lives in chunk i // _CHUNK and is
# drawn from the stream keyed by (seed, chunk start), so estimates do not
# depend on how many workers split the chunks.
_CHUNK = 1 << 16

_SUPPORTED_DIMS = (1, 2, 3)

_ORTHOGONALITY_TOL = 1e-10
_FIXED_SPACE_TOL = 1e-9
_MEMBERSHIP_TOL = 1e-12
_ROW_CHUNK = 512


class DegenerateBodyError(ValueError):
    """Raised when a vertex list spans zero volume in its ambient dimension."""


class ParallelStripsError(ValueError):
    """Raised when two strips have (numerically) parallel directions."""


def _as_points(values, dimension: int | None = None) -> np.ndarray:
    pts = np.asarray(values, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if dimension == 1 or dimension is None else pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("expected a nonempty 2-d array of row points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if dimension is not None and pts.shape[1] != dimension:
        raise ValueError(
            f"points have dimension {pts.shape[1]}, expected {dimension}"
        )
    return pts


@dataclass(eq=False)
class PointCloud:
    """Finite nonempty set of points in ``R^l``, stored as rows."""

    points: np.ndarray

    def __post_init__(self) -> None:
        self.points = _as_points(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "PointCloud":
        """Read one point per line, comma-separated coordinates."""
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


def _directed_sq_max(source: np.ndarray, target: np.ndarray) -> float:
    """max over source points of squared distance to the nearest target point."""
    worst = 0.0
    for start in range(0, source.shape[0], _ROW_CHUNK):
        block = source[start : start + _ROW_CHUNK]
        diff = block[:, None, :] - target[None, :, :]
        nearest = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
        worst = max(worst, float(nearest.max()))
    return worst


def hausdorff_distance(first: PointCloud, second: PointCloud) -> float:
    """Hausdorff distance between two finite point clouds.

    The larger of the two directed distances, where the directed distance
    from X to Y is the maximum over X of the distance to the nearest point
    of Y.  Raises ``ValueError`` when the ambient dimensions differ.
    """
    if first.dimension != second.dimension:
        raise ValueError(
            f"dimension mismatch: {first.dimension} versus {second.dimension}"
        )
    forward = _directed_sq_max(first.points, second.points)
    backward = _directed_sq_max(second.points, first.points)
    return math.sqrt(max(forward, backward))


@dataclass(eq=False)
class Isometry:
    """Rigid motion ``x -> Q x + t`` of ``R^l`` with orthogonal ``Q``."""

    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float).reshape(-1)
        l = self.translation.shape[0]
        if self.matrix.shape != (l, l):
            raise ValueError("matrix and translation dimensions disagree")
        defect = self.matrix.T @ self.matrix - np.eye(l)
        if float(np.abs(defect).max()) > _ORTHOGONALITY_TOL:
            raise ValueError("matrix is not orthogonal")

    @property
    def dimension(self) -> int:
        return self.translation.shape[0]

    @classmethod
    def translation_by(cls, vector) -> "Isometry":
        vec = np.asarray(vector, dtype=float).reshape(-1)
        return cls(np.eye(vec.shape[0]), vec)

    @classmethod
    def rotation_2d(cls, angle: float, center=None) -> "Isometry":
        """Planar rotation by ``angle`` about ``center`` (default: origin)."""
        c, s = math.cos(angle), math.sin(angle)
        q = np.array([[c, -s], [s, c]])
        if center is None:
            t = np.zeros(2)
        else:
            ctr = np.asarray(center, dtype=float).reshape(2)
            t = ctr - q @ ctr
        return cls(q, t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + self.translation

    def translational_part(self) -> float:
        """Norm of the translation component invisible to the rotation.

        This is the projection of ``t`` onto the fixed space of ``Q`` —
        equivalently the minimum displacement ``min_x |A(x) - x|``.  It
        vanishes exactly when the motion has a fixed point (for example a
        rotation about any center), and equals ``|t|`` for a pure
        translation.
        """
        _, singular, v_rows = np.linalg.svd(self.matrix - np.eye(self.dimension))
        fixed_rows = v_rows[singular <= _FIXED_SPACE_TOL]
        if fixed_rows.shape[0] == 0:
            return 0.0
        return float(np.linalg.norm(fixed_rows @ self.translation))


@dataclass(eq=False)
class ConvexBody:
    """Convex polytope in ``R^l`` (``l`` in {1, 2, 3}) given by its vertices.

    The body is the convex hull of the vertex rows.  Construction rejects
    vertex lists that span zero ``l``-volume.
    """

    vertices: np.ndarray
    _facet_normals: np.ndarray = field(init=False, repr=False)
    _facet_offsets: np.ndarray = field(init=False, repr=False)
    _volume: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.vertices = _as_points(self.vertices)
        l = self.dimension
        if l not in _SUPPORTED_DIMS:
            raise ValueError(f"dimension must be one of {_SUPPORTED_DIMS}, got {l}")
        if l == 1:
            lo = float(self.vertices.min())
            hi = float(self.vertices.max())
            if not hi > lo:
                raise DegenerateBodyError("vertices span a single point")
            self._facet_normals = np.array([[1.0], [-1.0]])
            self._facet_offsets = np.array([-hi, lo])
            self._volume = hi - lo
            return
        try:
            hull = ConvexHull(self.vertices)
        except QhullError as exc:
            raise DegenerateBodyError(
                "vertices span zero volume in their ambient dimension"
            ) from exc
        if not hull.volume > 0.0:
            raise DegenerateBodyError("vertex hull has zero volume")
        # Facet form: normals @ x + offsets <= 0 on the body.
        self._facet_normals = hull.equations[:, :-1].copy()
        self._facet_offsets = hull.equations[:, -1].copy()
        self._volume = float(hull.volume)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    @property
    def volume(self) -> float:
        """Exact hull volume (length / area / volume for l = 1 / 2 / 3)."""
        return self._volume

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "ConvexBody":
        """Read one vertex per line, comma-separated coordinates."""
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    def transformed(self, motion: Isometry) -> "ConvexBody":
        if motion.dimension != self.dimension:
            raise ValueError("isometry dimension does not match the body")
        return ConvexBody(motion.apply(self.vertices))

    def contains(self, points: np.ndarray, tol: float = _MEMBERSHIP_TOL):
        """Boolean mask: which row points lie in the body (within ``tol``)."""
        pts = _as_points(points, self.dimension)
        slack = pts @ self._facet_normals.T + self._facet_offsets
        return np.all(slack <= tol, axis=1)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(eq=False)
class UnionVolumeReport:
    """Monte-Carlo volume estimates for a body and its union with a copy.

    ``body_volume`` and ``union_volume`` are the hit-fraction estimates over
    a common bounding box; the errors are one-standard-deviation binomial
    estimates.  Identical (seed, samples, geometry) inputs reproduce the
    report bit for bit.
    """

    body_volume: float
    union_volume: float
    body_error: float
    union_error: float
    samples: int
    seed: int
    box_volume: float

    @property
    def gain(self) -> float:
        return self.union_volume - self.body_volume


def _count_chunk(
    seed: int,
    start: int,
    count: int,
    lo: np.ndarray,
    span: np.ndarray,
    body: ConvexBody,
    moved: ConvexBody,
) -> tuple[int, int]:
    gen = sample_stream(seed, start)
    pts = lo + gen.random((count, lo.shape[0])) * span
    in_body = body.contains(pts)
    in_union = in_body | moved.contains(pts)
    return int(in_body.sum()), int(in_union.sum())


def union_volume(
    body: ConvexBody,
    motion: Isometry,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> UnionVolumeReport:
    """Estimate vol(Y) and vol(Y ∪ A(Y)) by common-sample Monte Carlo.

    Samples are uniform in the joint bounding box of the body and its image.
    Sample ``i`` is a pure function of ``(seed, i)``: chunks of fixed size
    are keyed by their first sample index, so the result is independent of
    the worker count (``FATFLAT_THREADS``) and reproducible bit for bit.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    moved = body.transformed(motion)
    lo = np.minimum(body.bounding_box()[0], moved.bounding_box()[0])
    hi = np.maximum(body.bounding_box()[1], moved.bounding_box()[1])
    span = hi - lo
    box_volume = float(np.prod(span))

    starts = list(range(0, samples, _CHUNK))
    jobs = [(start, min(_CHUNK, samples - start)) for start in starts]
    workers = worker_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(
                pool.map(
                    lambda job: _count_chunk(
                        seed, job[0], job[1], lo, span, body, moved
                    ),
                    jobs,
                )
            )
    else:
        counts = [
            _count_chunk(seed, start, count, lo, span, body, moved)
            for start, count in jobs
        ]
    body_hits = sum(c[0] for c in counts)
    union_hits = sum(c[1] for c in counts)

    def _estimate(hits: int) -> tuple[float, float]:
        p = hits / samples
        return box_volume * p, box_volume * math.sqrt(p * (1.0 - p) / samples)

    body_vol, body_err = _estimate(body_hits)
    union_vol, union_err = _estimate(union_hits)
    return UnionVolumeReport(
        body_volume=body_vol,
        union_volume=union_vol,
        body_error=body_err,
        union_error=union_err,
        samples=samples,
        seed=seed,
        box_volume=box_volume,
    )


@dataclass(eq=False)
class FramedStrip2D:
    """Infinite planar strip: points within ``half_width`` of a center line.

    The center line passes through ``offset`` with direction angle
    ``angle``; the strip is the set of points whose distance to that line is
    at most ``half_width``.
    """

    angle: float
    half_width: float
    offset: np.ndarray

    def __post_init__(self) -> None:
        self.offset = np.asarray(self.offset, dtype=float).reshape(2)
        if not self.half_width > 0.0:
            raise ValueError("half_width must be positive")

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.angle), math.cos(self.angle)])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return (pts - self.offset) @ self.normal

    def contains(self, points: np.ndarray, tol: float = 0.0):
        return np.abs(self.signed_distance(points)) <= self.half_width + tol


@dataclass(eq=False)
class FlatBox2D:
    """Solid rectangle: ``center`` plus extents along an axis and across it.

    ``length`` is the full extent along the axis at ``angle``;
    ``cross_section`` is the full extent across it.
    """

    center: np.ndarray
    angle: float
    length: float
    cross_section: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        if not (self.length > 0.0 and self.cross_section > 0.0):
            raise ValueError("length and cross_section must be positive")

    @property
    def axis(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def cross_axis(self) -> np.ndarray:
        return np.array([-math.sin(self.angle), math.cos(self.angle)])

    def corners(self) -> np.ndarray:
        half_l = 0.5 * self.length * self.axis
        half_w = 0.5 * self.cross_section * self.cross_axis
        return np.array(
            [
                self.center + half_l + half_w,
                self.center + half_l - half_w,
                self.center - half_l - half_w,
                self.center - half_l + half_w,
            ]
        )

    def grid_points(self, along: int = 100, across: int = 100) -> np.ndarray:
        """Regular grid filling the box, corners included — for membership checks."""
        s = np.linspace(-0.5, 0.5, along)
        t = np.linspace(-0.5, 0.5, across)
        ss, tt = np.meshgrid(s, t, indexing="ij")
        flat = np.stack([ss.ravel(), tt.ravel()], axis=1)
        return (
            self.center
            + flat[:, :1] * self.length * self.axis
            + flat[:, 1:] * self.cross_section * self.cross_axis
        )

    def contains(self, points: np.ndarray, tol: float = 0.0):
        pts = np.asarray(points, dtype=float).reshape(-1, 2) - self.center
        u = pts @ self.axis
        w = pts @ self.cross_axis
        return (np.abs(u) <= 0.5 * self.length + tol) & (
            np.abs(w) <= 0.5 * self.cross_section + tol
        )


def _line_angle_between(first: float, second: float) -> float:
    """Angle in [0, pi/2] between two undirected line directions."""
    raw = math.fmod(second - first, math.pi)
    if raw < -0.5 * math.pi:
        raw += math.pi
    elif raw > 0.5 * math.pi:
        raw -= math.pi
    return abs(raw)


def thicken_strips(first: FramedStrip2D, second: FramedStrip2D) -> FlatBox2D:
    """Long box inside the union of two strips crossing at a small angle.

    Requires ``0 < theta < min(half_width)``, where ``theta`` is the angle
    between the two center lines; parallel strips are rejected.  The box
    is aligned with the first strip and placed past the crossing point so
    that the slab protruding beyond the first strip lies inside the second.
    Its cross-section is ``2*d1 + d/4`` with ``d = min(d1, d2)`` — the
    first strip's cross-section plus a quarter of the smaller half-width —
    and its length grows without bound as ``theta`` decreases.
    """
    delta_1 = first.half_width
    delta_2 = second.half_width
    delta = min(delta_1, delta_2)
    theta = _line_angle_between(first.angle, second.angle)
    if theta == 0.0:
        raise ParallelStripsError("strip directions are parallel")
    if not theta < delta:
        raise ValueError(
            f"crossing angle {theta} must be smaller than the half-width {delta}"
        )

    # Crossing point of the two center lines.
    u1 = first.direction
    u2 = second.direction
    cross_dirs = u1[0] * u2[1] - u1[1] * u2[0]
    gap = second.offset - first.offset
    t_along = (gap[0] * u2[1] - gap[1] * u2[0]) / cross_dirs
    crossing = first.offset + t_along * u1

    # Work in the frame (crossing; u1, mirror * n1) in which the second
    # strip's center line has positive slope tan(theta).
    raw = math.fmod(second.angle - first.angle, math.pi)
    if raw < -0.5 * math.pi:
        raw += math.pi
    elif raw > 0.5 * math.pi:
        raw -= math.pi
    mirror = 1.0 if raw >= 0.0 else -1.0
    up = mirror * first.normal

    # The box spans y in [-d1, d1 + g] (frame coordinates): the part with
    # |y| <= d1 lies in the first strip; the slab above must lie in the
    # second, i.e. |y cos(theta) - x sin(theta)| <= d2 on all of it.  The
    # corner constraints allow any length up to (2 d2 - g cos(theta)) /
    # sin(theta) about the center below; (2 d2 - g) / tan(theta) is within
    # that bound (cos(theta) <= 1) and scales superlinearly in 1/theta.
    gain = 0.25 * delta
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    half_length = (2.0 * delta_2 - gain) / (2.0 * math.tan(theta))
    x_center = (delta_1 + 0.5 * gain) * cos_t / sin_t
    center = crossing + x_center * u1 + 0.5 * gain * up
    return FlatBox2D(
        center=center,
        angle=first.angle,
        length=2.0 * half_length,
        cross_section=2.0 * delta_1 + gain,
    )
