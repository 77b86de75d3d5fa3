"""2D geometry kernel: points, segments, oriented rectangles, rigid
transforms, and a uniform-grid broad-phase index.

Lengths are millimetres and angles degrees throughout the package. All
types here are immutable after construction and every operation is a pure
function, so values can be shared freely across threads.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence, Union

#: Degeneracy/equality tolerance in mm, three orders of magnitude below the
#: 0.1 mm scan and positioning accuracy, so it never masks a real constraint.
EPS_GEOM = 1e-6

# Two directions are considered parallel when |cross| falls below this
# fraction of the product of the segment lengths.
_PARALLEL_REL = 1e-12

BBox = tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)


class GeometryError(ValueError):
    """Invalid geometric construction or degenerate predicate input."""


class CollinearOverlap(GeometryError):
    """Two segments share more than a single point."""


def normalize_deg(angle: float) -> float:
    """Normalize an angle in degrees to [0, 360)."""
    a = math.fmod(float(angle), 360.0)
    if a < 0.0:
        a += 360.0
    return 0.0 if a >= 360.0 else a


def angle_diff_deg(a: float, b: float) -> float:
    """Absolute difference between two directions, folded into [0, 180]."""
    d = math.fmod(a - b, 360.0)
    if d < -180.0:
        d += 360.0
    elif d > 180.0:
        d -= 360.0
    return abs(d)


def direction_diff_deg(a: float, b: float) -> float:
    """Difference between two undirected lines, folded into [0, 90]."""
    d = angle_diff_deg(a, b)
    return 180.0 - d if d > 90.0 else d


@dataclass(frozen=True)
class Point2:
    """A point (or free vector) in the working plane, mm."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> "Point2":
        return Point2(self.x * k, self.y * k)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def rotated_deg(self, angle: float) -> "Point2":
        """Rotate about the origin by `angle` degrees (CCW positive)."""
        r = math.radians(angle)
        c, s = math.cos(r), math.sin(r)
        return Point2(c * self.x - s * self.y, s * self.x + c * self.y)


def cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


@dataclass(frozen=True)
class Segment:
    """A line segment between two distinct points."""

    a: Point2
    b: Point2

    def __post_init__(self):
        if self.a.distance_to(self.b) <= EPS_GEOM:
            raise GeometryError(
                f"degenerate segment {self.a} .. {self.b} (length <= {EPS_GEOM} mm)"
            )

    @property
    def length(self) -> float:
        return self.a.distance_to(self.b)

    @property
    def direction_deg(self) -> float:
        """Direction from a to b in [0, 360)."""
        return normalize_deg(math.degrees(math.atan2(self.b.y - self.a.y, self.b.x - self.a.x)))

    def point_at(self, t: float) -> Point2:
        return Point2(
            self.a.x + t * (self.b.x - self.a.x),
            self.a.y + t * (self.b.y - self.a.y),
        )

    def bbox(self) -> BBox:
        return (
            min(self.a.x, self.b.x),
            min(self.a.y, self.b.y),
            max(self.a.x, self.b.x),
            max(self.a.y, self.b.y),
        )


@dataclass(frozen=True)
class Transform2:
    """Rigid planar motion: rotation about the origin, then translation."""

    rotation: float
    translation: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "rotation", normalize_deg(self.rotation))
        object.__setattr__(
            self, "translation", (float(self.translation[0]), float(self.translation[1]))
        )

    def apply(self, p: Point2) -> Point2:
        q = p.rotated_deg(self.rotation)
        return Point2(q.x + self.translation[0], q.y + self.translation[1])

    def inverse(self) -> "Transform2":
        inv_rot = normalize_deg(-self.rotation)
        t = Point2(-self.translation[0], -self.translation[1]).rotated_deg(inv_rot)
        return Transform2(inv_rot, (t.x, t.y))


@dataclass(frozen=True)
class OrientedRect:
    """A rectangle with its long axis at `angle` degrees.

    half_length is measured along the long axis, half_width across it.
    """

    center: Point2
    half_length: float
    half_width: float
    angle: float

    def __post_init__(self):
        if not (self.half_length > 0.0 and self.half_width > 0.0):
            raise GeometryError("OrientedRect half extents must be positive")
        object.__setattr__(self, "angle", normalize_deg(self.angle))

    def _to_local(self, p: Point2) -> tuple[float, float]:
        r = math.radians(self.angle)
        c, s = math.cos(r), math.sin(r)
        dx, dy = p.x - self.center.x, p.y - self.center.y
        return (c * dx + s * dy, -s * dx + c * dy)

    def contains_point(self, p: Point2) -> bool:
        lx, ly = self._to_local(p)
        return abs(lx) <= self.half_length and abs(ly) <= self.half_width

    def corners(self) -> tuple[Point2, Point2, Point2, Point2]:
        r = math.radians(self.angle)
        c, s = math.cos(r), math.sin(r)
        ux, uy = c * self.half_length, s * self.half_length
        vx, vy = -s * self.half_width, c * self.half_width
        cx, cy = self.center.x, self.center.y
        return (
            Point2(cx + ux + vx, cy + uy + vy),
            Point2(cx - ux + vx, cy - uy + vy),
            Point2(cx - ux - vx, cy - uy - vy),
            Point2(cx + ux - vx, cy + uy - vy),
        )

    def bbox(self) -> BBox:
        pts = self.corners()
        xs = [p.x for p in pts]
        ys = [p.y for p in pts]
        return (min(xs), min(ys), max(xs), max(ys))


class PointSegDistance(NamedTuple):
    distance: float
    t: float


def point_segment_distance(p: Point2, s: Segment) -> PointSegDistance:
    """Euclidean distance from p to the nearest point of s.

    Also returns the clamped parameter t in [0, 1] of that nearest point.
    """
    dx, dy = s.b.x - s.a.x, s.b.y - s.a.y
    wx, wy = p.x - s.a.x, p.y - s.a.y
    t = (wx * dx + wy * dy) / (dx * dx + dy * dy)
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    nx, ny = s.a.x + t * dx, s.a.y + t * dy
    return PointSegDistance(math.hypot(p.x - nx, p.y - ny), t)


def seg_seg_intersection(s1: Segment, s2: Segment) -> Optional[Point2]:
    """Unique intersection point of two segments, or None.

    Endpoint touching within EPS_GEOM counts as an intersection. Collinear
    segments sharing more than one point raise CollinearOverlap: a contour
    sliding along a wall is a placement problem, not an intersection.
    """
    rx, ry = s1.b.x - s1.a.x, s1.b.y - s1.a.y
    sx, sy = s2.b.x - s2.a.x, s2.b.y - s2.a.y
    qpx, qpy = s2.a.x - s1.a.x, s2.a.y - s1.a.y
    denom = cross(rx, ry, sx, sy)
    len1 = math.hypot(rx, ry)
    len2 = math.hypot(sx, sy)

    if abs(denom) <= _PARALLEL_REL * len1 * len2:
        # Parallel. Distinct lines never intersect; collinear lines need an
        # overlap analysis in s1's parameter space.
        line_dist = abs(cross(qpx, qpy, rx, ry)) / len1
        if line_dist > EPS_GEOM:
            return None
        r2 = rx * rx + ry * ry
        ta = (qpx * rx + qpy * ry) / r2
        tb = ((s2.b.x - s1.a.x) * rx + (s2.b.y - s1.a.y) * ry) / r2
        lo = max(0.0, min(ta, tb))
        hi = min(1.0, max(ta, tb))
        tol_t = EPS_GEOM / len1
        if hi - lo > tol_t:
            raise CollinearOverlap(f"segments overlap over {((hi - lo) * len1):.6g} mm")
        if hi - lo >= -tol_t:
            return s1.point_at((lo + hi) / 2.0)
        return None

    t = cross(qpx, qpy, sx, sy) / denom
    u = cross(qpx, qpy, rx, ry) / denom
    tol_t = EPS_GEOM / len1
    tol_u = EPS_GEOM / len2
    if -tol_t <= t <= 1.0 + tol_t and -tol_u <= u <= 1.0 + tol_u:
        return Point2(s1.a.x + t * rx, s1.a.y + t * ry)
    return None


def _aabb_segment_overlap(
    x0: float, y0: float, x1: float, y1: float, hx: float, hy: float
) -> bool:
    """Slab clipping of a segment against the closed box [-hx,hx]x[-hy,hy]."""
    t0, t1 = 0.0, 1.0
    for p, d, h in ((x0, x1 - x0, hx), (y0, y1 - y0, hy)):
        if d == 0.0:
            if p < -h or p > h:
                return False
        else:
            ta = (-h - p) / d
            tb = (h - p) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return False
    return True


def rect_intersects_segment(rect: OrientedRect, seg: Segment) -> bool:
    """True iff the closed rectangle and the segment share at least one point."""
    x0, y0 = rect._to_local(seg.a)
    x1, y1 = rect._to_local(seg.b)
    return _aabb_segment_overlap(x0, y0, x1, y1, rect.half_length, rect.half_width)


class SpatialIndex:
    """Uniform-grid broad phase over items with known bounding boxes.

    Each item is registered in every grid bucket its bounding box overlaps,
    so a query always returns a superset of the exact matches; exact
    predicate filtering of the candidates equals a brute-force scan.
    Build once, query many; queries never mutate.
    """

    def __init__(self, cell_size: float, items: Iterable[tuple[int, BBox]] = ()):
        if not cell_size > 0.0:
            raise GeometryError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self._buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        self._count = 0
        for item_id, bbox in items:
            self._insert(item_id, bbox)

    def _cell_range(self, bbox: BBox) -> tuple[int, int, int, int]:
        cs = self.cell_size
        return (
            math.floor(bbox[0] / cs),
            math.floor(bbox[1] / cs),
            math.floor(bbox[2] / cs),
            math.floor(bbox[3] / cs),
        )

    def _insert(self, item_id: int, bbox: BBox) -> None:
        ix0, iy0, ix1, iy1 = self._cell_range(bbox)
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                self._buckets[(ix, iy)].append(item_id)
        self._count += 1

    def __len__(self) -> int:
        return self._count

    def query_bbox(self, bbox: BBox) -> list[int]:
        """Candidate item ids whose own bbox may overlap `bbox`, sorted."""
        ix0, iy0, ix1, iy1 = self._cell_range(bbox)
        found: set[int] = set()
        buckets = self._buckets
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                hit = buckets.get((ix, iy))
                if hit:
                    found.update(hit)
        return sorted(found)

    def query(self, probe: Union[Segment, OrientedRect]) -> list[int]:
        return self.query_bbox(probe.bbox())


def convex_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Convex hull (monotone chain), CCW, without the repeated first point."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return list(pts)

    def half(ordered):
        chain: list[tuple[float, float]] = []
        for p in ordered:
            while (
                len(chain) >= 2
                and cross(
                    chain[-1][0] - chain[-2][0],
                    chain[-1][1] - chain[-2][1],
                    p[0] - chain[-2][0],
                    p[1] - chain[-2][1],
                )
                <= 0.0
            ):
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    return lower[:-1] + upper[:-1]


def min_area_obb_dims(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Side lengths of the minimum-area oriented bounding rectangle.

    Rotating calipers over the convex hull; returns (d1, d2) in the order
    (extent along the defining hull edge, extent across it).
    """
    hull = convex_hull(points)
    if len(hull) == 0:
        raise GeometryError("no points")
    if len(hull) == 1:
        return (0.0, 0.0)
    best = None
    n = len(hull)
    for i in range(n):
        x1, y1 = hull[i]
        x2, y2 = hull[(i + 1) % n]
        ex, ey = x2 - x1, y2 - y1
        elen = math.hypot(ex, ey)
        if elen <= EPS_GEOM:
            continue
        ux, uy = ex / elen, ey / elen
        us = [ux * x + uy * y for x, y in hull]
        vs = [-uy * x + ux * y for x, y in hull]
        du = max(us) - min(us)
        dv = max(vs) - min(vs)
        area = du * dv
        if best is None or area < best[0]:
            best = (area, du, dv)
    if best is None:  # all hull points coincident within EPS
        return (0.0, 0.0)
    return (best[1], best[2])


def point_in_polygon(p: Point2, polygon: Sequence[Point2], include_boundary: bool = True) -> bool:
    """Even-odd test of p against a simple closed polygon.

    Points within EPS_GEOM of the boundary are classified by
    `include_boundary`.
    """
    n = len(polygon)
    on_boundary = False
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        if a.distance_to(b) <= EPS_GEOM:
            continue
        if point_segment_distance(p, Segment(a, b)).distance <= EPS_GEOM:
            on_boundary = True
            break
    if on_boundary:
        return include_boundary
    inside = False
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        if (a.y > p.y) != (b.y > p.y):
            xs = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if xs > p.x:
                inside = not inside
    return inside
