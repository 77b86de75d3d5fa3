"""Target cut shapes: closed contours of line and circular-arc segments,
the pattern-file grammar, rigid placement, and the geometric queries the
planner needs.

Pattern files are plain UTF-8 text, units mm, one command per
whitespace-separated token group:

    M x y                  start a contour
    L x y                  straight segment
    A x y r cw|ccw small|large   circular arc to (x, y) with radius r
    Z                      close the contour (implicit straight segment
                           back to the start when not already there)
    # comment to end of line

Multiple contours are written as repeated M..Z blocks. The contour with
the largest absolute area is the outer boundary; the rest are holes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Union

from .errors import ParseError
from .geom import (
    EPS_GEOM,
    CollinearOverlap,
    GeometryError,
    Point2,
    Segment,
    Transform2,
    point_in_polygon,
    seg_seg_intersection,
)

#: Default chord-to-arc tolerance for flattening, one order below the
#: 0.1 mm positioning accuracy.
DEFAULT_FLATTEN_TOL = 0.01

#: Rigid placement of a shape on the block (rotation about the origin,
#: then translation).
Placement = Transform2


class OpenContour(ValueError):
    """A contour is missing its Close command."""


class SelfIntersecting(ValueError):
    """A contour crosses itself, or two contours cross each other."""


class HoleOutsideOuter(ValueError):
    """A hole contour is not strictly inside the outer contour."""


@dataclass(frozen=True)
class MoveTo:
    point: Point2


@dataclass(frozen=True)
class LineTo:
    point: Point2


@dataclass(frozen=True)
class ArcTo:
    end: Point2
    radius: float
    clockwise: bool
    large_arc: bool


@dataclass(frozen=True)
class Close:
    pass


PathCommand = Union[MoveTo, LineTo, ArcTo, Close]


@dataclass(frozen=True)
class _Arc:
    """Resolved arc geometry: centre, radius and signed sweep (radians,
    CCW positive)."""

    start: Point2
    end: Point2
    center: Point2
    radius: float
    start_angle: float
    sweep: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def point_at(self, fraction: float) -> Point2:
        ang = self.start_angle + self.sweep * fraction
        return Point2(
            self.center.x + self.radius * math.cos(ang),
            self.center.y + self.radius * math.sin(ang),
        )


def _resolve_arc(start: Point2, cmd: ArcTo) -> _Arc:
    chord = start.distance_to(cmd.end)
    if chord <= EPS_GEOM:
        raise GeometryError("arc chord is degenerate; full circles need two arcs")
    if chord > 2.0 * cmd.radius + EPS_GEOM:
        raise GeometryError(
            f"arc chord {chord:.6g} mm exceeds diameter {2.0 * cmd.radius:.6g} mm"
        )
    half = chord / 2.0
    h = math.sqrt(max(cmd.radius * cmd.radius - half * half, 0.0))
    mx, my = (start.x + cmd.end.x) / 2.0, (start.y + cmd.end.y) / 2.0
    ux, uy = (cmd.end.x - start.x) / chord, (cmd.end.y - start.y) / chord
    # Left-of-travel normal; the centre sits on it for ccw-small and
    # cw-large arcs, opposite otherwise.
    nx, ny = -uy, ux
    sign = 1.0 if (cmd.clockwise == cmd.large_arc) else -1.0
    center = Point2(mx + sign * h * nx, my + sign * h * ny)
    a0 = math.atan2(start.y - center.y, start.x - center.x)
    a1 = math.atan2(cmd.end.y - center.y, cmd.end.x - center.x)
    two_pi = 2.0 * math.pi
    if cmd.clockwise:
        sweep = -((a0 - a1) % two_pi)
        if sweep == 0.0:
            sweep = -two_pi
    else:
        sweep = (a1 - a0) % two_pi
        if sweep == 0.0:
            sweep = two_pi
    return _Arc(start, cmd.end, center, cmd.radius, a0, sweep)


_ContourEdge = Union[Segment, _Arc]


@dataclass(frozen=True)
class Contour:
    """One closed loop: MoveTo, then lines/arcs, then Close."""

    commands: tuple[PathCommand, ...]

    @property
    def start(self) -> Point2:
        first = self.commands[0]
        assert isinstance(first, MoveTo)
        return first.point

    @cached_property
    def edges(self) -> tuple[_ContourEdge, ...]:
        """Geometric edges in order, including the implicit closing segment."""
        out: list[_ContourEdge] = []
        cur = self.start
        for cmd in self.commands[1:]:
            if isinstance(cmd, LineTo):
                out.append(Segment(cur, cmd.point))
                cur = cmd.point
            elif isinstance(cmd, ArcTo):
                out.append(_resolve_arc(cur, cmd))
                cur = cmd.end
            elif isinstance(cmd, Close):
                if cur.distance_to(self.start) > EPS_GEOM:
                    out.append(Segment(cur, self.start))
        return tuple(out)

    def flatten(self, tol: float) -> list[Point2]:
        """Closed polygon approximating the contour.

        Arc chords keep the sagitta within tol; straight edges pass through
        unchanged. The first point is not repeated at the end.
        """
        if not tol > 0.0:
            raise GeometryError("flatten tolerance must be positive")
        pts: list[Point2] = [self.start]
        for edge in self.edges:
            if isinstance(edge, Segment):
                pts.append(edge.b)
            else:
                step = math.acos(max(-1.0, min(1.0, 1.0 - tol / edge.radius)))
                n = max(1, math.ceil(abs(edge.sweep) / step))
                for j in range(1, n):
                    pts.append(edge.point_at(j / n))
                pts.append(edge.end)  # exact endpoint, no angular drift
        if pts[-1].distance_to(pts[0]) <= EPS_GEOM:
            pts.pop()
        return pts

    def flatten_segments(self, tol: float) -> list[Segment]:
        pts = self.flatten(tol)
        out = []
        n = len(pts)
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            if a.distance_to(b) > EPS_GEOM:
                out.append(Segment(a, b))
        return out

    def signed_area(self, tol: float = DEFAULT_FLATTEN_TOL) -> float:
        pts = self.flatten(tol)
        acc = 0.0
        n = len(pts)
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            acc += a.x * b.y - b.x * a.y
        return acc / 2.0

    def perimeter(self) -> float:
        return sum(e.length for e in self.edges)

    def bbox(self) -> tuple[float, float, float, float]:
        xs: list[float] = []
        ys: list[float] = []
        for edge in self.edges:
            if isinstance(edge, Segment):
                xs += [edge.a.x, edge.b.x]
                ys += [edge.a.y, edge.b.y]
            else:
                xs += [edge.start.x, edge.end.x]
                ys += [edge.start.y, edge.end.y]
                # Axis-extreme points of the circle that fall inside the sweep.
                for k in range(4):
                    ang = k * math.pi / 2.0
                    if _angle_in_sweep(ang, edge.start_angle, edge.sweep):
                        xs.append(edge.center.x + edge.radius * math.cos(ang))
                        ys.append(edge.center.y + edge.radius * math.sin(ang))
        return (min(xs), min(ys), max(xs), max(ys))


def _angle_in_sweep(ang: float, start: float, sweep: float) -> bool:
    two_pi = 2.0 * math.pi
    if sweep >= 0.0:
        rel = (ang - start) % two_pi
        return rel <= sweep
    rel = (start - ang) % two_pi
    return rel <= -sweep


@dataclass(frozen=True)
class Shape:
    """A target cut boundary: one outer contour plus zero or more holes."""

    outer: Contour
    holes: tuple[Contour, ...] = ()

    def contours(self) -> Iterator[Contour]:
        yield self.outer
        yield from self.holes

    def bbox(self) -> tuple[float, float, float, float]:
        boxes = [c.bbox() for c in self.contours()]
        return (
            min(b[0] for b in boxes),
            min(b[1] for b in boxes),
            max(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        for tok in body.split():
            tokens.append((tok, lineno))
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[tuple[str, int]]):
        self._tokens = tokens
        self._pos = 0
        self.last_line = 1

    def eof(self) -> bool:
        return self._pos >= len(self._tokens)

    def next(self, what: str) -> tuple[str, int]:
        if self.eof():
            raise ParseError(self.last_line, f"unexpected end of file, expected {what}")
        tok, line = self._tokens[self._pos]
        self._pos += 1
        self.last_line = line
        return tok, line

    def next_float(self, what: str) -> float:
        tok, line = self.next(what)
        try:
            v = float(tok)
        except ValueError:
            raise ParseError(line, f"expected {what}, got {tok!r}") from None
        if not math.isfinite(v):
            raise ParseError(line, f"{what} must be finite, got {tok!r}")
        return v


def _parse_contours(text: str) -> list[tuple[Contour, int]]:
    stream = _TokenStream(_tokenize(text))
    contours: list[tuple[Contour, int]] = []
    commands: list[PathCommand] = []
    current: Optional[Point2] = None
    open_line = 0

    while not stream.eof():
        tok, line = stream.next("command")
        if tok == "M":
            if commands:
                raise ParseError(line, "contour not closed before new M command")
            x = stream.next_float("x coordinate")
            y = stream.next_float("y coordinate")
            current = Point2(x, y)
            commands = [MoveTo(current)]
            open_line = line
        elif tok == "L":
            if not commands:
                raise ParseError(line, "L command outside a contour")
            x = stream.next_float("x coordinate")
            y = stream.next_float("y coordinate")
            pt = Point2(x, y)
            if current is not None and current.distance_to(pt) <= EPS_GEOM:
                raise ParseError(line, "zero-length line segment")
            commands.append(LineTo(pt))
            current = pt
        elif tok == "A":
            if not commands:
                raise ParseError(line, "A command outside a contour")
            x = stream.next_float("x coordinate")
            y = stream.next_float("y coordinate")
            r = stream.next_float("radius")
            if not r > 0.0:
                raise ParseError(line, "arc radius must be positive")
            sweep_tok, sweep_line = stream.next("cw|ccw")
            if sweep_tok not in ("cw", "ccw"):
                raise ParseError(sweep_line, f"expected cw or ccw, got {sweep_tok!r}")
            size_tok, size_line = stream.next("small|large")
            if size_tok not in ("small", "large"):
                raise ParseError(size_line, f"expected small or large, got {size_tok!r}")
            cmd = ArcTo(Point2(x, y), r, sweep_tok == "cw", size_tok == "large")
            assert current is not None
            try:
                _resolve_arc(current, cmd)
            except GeometryError as e:
                raise ParseError(line, str(e)) from None
            commands.append(cmd)
            current = cmd.end
        elif tok == "Z":
            if not commands:
                raise ParseError(line, "Z command outside a contour")
            commands.append(Close())
            contours.append((Contour(tuple(commands)), open_line))
            commands = []
            current = None
        else:
            raise ParseError(line, f"unknown command {tok!r}")

    if commands:
        raise OpenContour(f"contour starting at line {open_line} has no Z")
    if not contours:
        raise ParseError(stream.last_line, "no contours in file")
    return contours


def _check_simple(contour: Contour, label: str, tol: float) -> None:
    segs = contour.flatten_segments(tol)
    n = len(segs)
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = (j == i + 1) or (i == 0 and j == n - 1)
            try:
                pt = seg_seg_intersection(segs[i], segs[j])
            except CollinearOverlap:
                raise SelfIntersecting(
                    f"{label}: segments {i} and {j} overlap"
                ) from None
            if pt is None:
                continue
            if adjacent:
                shared = segs[i].b if j == i + 1 else segs[i].a
                if pt.distance_to(shared) <= EPS_GEOM:
                    continue
            raise SelfIntersecting(
                f"{label}: segments {i} and {j} intersect at ({pt.x:.4f}, {pt.y:.4f})"
            )


def _check_disjoint(a: Contour, b: Contour, label: str, tol: float) -> None:
    for sa in a.flatten_segments(tol):
        for sb in b.flatten_segments(tol):
            try:
                pt = seg_seg_intersection(sa, sb)
            except CollinearOverlap:
                pt = sa.a
            if pt is not None:
                raise SelfIntersecting(f"{label}: contours touch at ({pt.x:.4f}, {pt.y:.4f})")


def parse_path(text: str) -> Shape:
    """Parse a pattern file into a validated Shape.

    Raises ParseError for grammar problems, OpenContour for a missing Z,
    SelfIntersecting for crossing geometry and HoleOutsideOuter when a
    hole is not strictly inside the outer contour.
    """
    tol = DEFAULT_FLATTEN_TOL
    contours = _parse_contours(text)

    areas = []
    for contour, open_line in contours:
        try:
            area = contour.signed_area(tol)
        except GeometryError as e:
            raise ParseError(open_line, str(e)) from None
        if abs(area) <= EPS_GEOM:
            raise ParseError(open_line, "contour encloses no area")
        areas.append(abs(area))

    for idx, (contour, _) in enumerate(contours):
        _check_simple(contour, f"contour {idx}", tol)

    outer_idx = max(range(len(contours)), key=lambda i: areas[i])
    outer = contours[outer_idx][0]
    holes = [c for i, (c, _) in enumerate(contours) if i != outer_idx]

    outer_poly = outer.flatten(tol)
    for hi, hole in enumerate(holes):
        for pt in hole.flatten(tol):
            if not point_in_polygon(pt, outer_poly, include_boundary=False):
                raise HoleOutsideOuter(f"hole {hi} is not strictly inside the outer contour")
        _check_disjoint(hole, outer, f"hole {hi} vs outer", tol)
    for i in range(len(holes)):
        for j in range(i + 1, len(holes)):
            _check_disjoint(holes[i], holes[j], f"holes {i} and {j}", tol)
            if point_in_polygon(holes[j].start, holes[i].flatten(tol), include_boundary=False):
                raise SelfIntersecting(f"hole {j} lies inside hole {i}")
            if point_in_polygon(holes[i].start, holes[j].flatten(tol), include_boundary=False):
                raise SelfIntersecting(f"hole {i} lies inside hole {j}")

    return Shape(outer, tuple(holes))


def _fmt(v: float) -> str:
    return repr(float(v))


def serialize(shape: Shape) -> str:
    """Inverse of parse_path; coordinates round-trip exactly."""
    lines: list[str] = []
    for contour in shape.contours():
        for cmd in contour.commands:
            if isinstance(cmd, MoveTo):
                lines.append(f"M {_fmt(cmd.point.x)} {_fmt(cmd.point.y)}")
            elif isinstance(cmd, LineTo):
                lines.append(f"L {_fmt(cmd.point.x)} {_fmt(cmd.point.y)}")
            elif isinstance(cmd, ArcTo):
                sweep = "cw" if cmd.clockwise else "ccw"
                size = "large" if cmd.large_arc else "small"
                lines.append(
                    f"A {_fmt(cmd.end.x)} {_fmt(cmd.end.y)} {_fmt(cmd.radius)} {sweep} {size}"
                )
            else:
                lines.append("Z")
    return "\n".join(lines) + "\n"


def flatten(shape: Shape, tol: float) -> list[list[Segment]]:
    """Polyline approximation per contour (outer first, then holes).

    The maximum chord-to-arc deviation is bounded by tol; straight
    segments pass through unchanged.
    """
    return [c.flatten_segments(tol) for c in shape.contours()]


def longest_straight_segment(shape: Shape) -> Optional[tuple[int, Segment]]:
    """The longest explicit L segment over all contours, or None.

    Ties are broken by contour index (outer = 0) then command order.
    """
    best: Optional[tuple[int, Segment]] = None
    best_len = 0.0
    for ci, contour in enumerate(shape.contours()):
        cur = contour.start
        for cmd in contour.commands[1:]:
            if isinstance(cmd, LineTo):
                seg = Segment(cur, cmd.point)
                if seg.length > best_len + EPS_GEOM:
                    best = (ci, seg)
                    best_len = seg.length
                cur = cmd.point
            elif isinstance(cmd, ArcTo):
                cur = cmd.end
    return best


def apply_placement(shape: Shape, placement: Placement) -> Shape:
    """Rotate about the origin, then translate. Arcs keep radius and sweep.

    Rigid motions preserve every shape invariant, so the result is not
    re-validated.
    """

    def move(p: Point2) -> Point2:
        return placement.apply(p)

    def map_contour(contour: Contour) -> Contour:
        cmds: list[PathCommand] = []
        for cmd in contour.commands:
            if isinstance(cmd, MoveTo):
                cmds.append(MoveTo(move(cmd.point)))
            elif isinstance(cmd, LineTo):
                cmds.append(LineTo(move(cmd.point)))
            elif isinstance(cmd, ArcTo):
                cmds.append(ArcTo(move(cmd.end), cmd.radius, cmd.clockwise, cmd.large_arc))
            else:
                cmds.append(cmd)
        return Contour(tuple(cmds))

    return Shape(map_contour(shape.outer), tuple(map_contour(h) for h in shape.holes))


def min_curvature_radius(shape: Shape) -> float:
    """Smallest arc radius anywhere on the shape; inf when it has no arcs."""
    best = math.inf
    for contour in shape.contours():
        for cmd in contour.commands:
            if isinstance(cmd, ArcTo):
                best = min(best, cmd.radius)
    return best
