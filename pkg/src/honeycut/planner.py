"""Cut planning: place a shape on the honeycomb map, turn contour/wall
crossings into feasible knife plunge points, and iterate the placement
until no problem points remain.

The rules a cut point must satisfy:

* it sits on a single wall (double glue walls are excluded by default),
* at least `node_clearance` away from every nodal point, yet otherwise as
  close to a node as possible (cuts near junctions keep the wall braced),
* moved along its wall by at most `relocation_radius` from the contour
  crossing, sampled on a `position_step` grid,
* the blade footprint at the chosen angle touches no other wall and
  contains no node, with the blade as close to wall-perpendicular as the
  neighbourhood allows (within `max_angle_deviation`, on the machine's
  angle grid),
* two cuts on one wall stay `same_edge_min_separation` apart.

A placement with any unsolvable crossing is abandoned and the search
moves on; the first placement in deterministic scan order with zero
problem points wins.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ParseError
from .geom import (
    EPS_GEOM,
    OrientedRect,
    Point2,
    Segment,
    direction_diff_deg,
    min_area_obb_dims,
    normalize_deg,
    point_in_polygon,
    point_segment_distance,
    rect_intersects_segment,
)
from .honeycomb import Crossing, Edge, EdgeKind, HoneycombMap, crossings_for_chain, nearest_node
from .honeycomb import ContourOnEdge
from .shape import Placement, Shape, apply_placement, flatten, longest_straight_segment, min_curvature_radius

log = logging.getLogger(__name__)

PLAN_FORMAT = "honeycomb-cutplan"
PLAN_VERSION = 1


class ShapeTooLarge(ValueError):
    """The shape cannot fit on the block at any rotation."""

    def __init__(self, shape_dims: tuple[float, float], block_dims: tuple[float, float]):
        self.shape_dims = shape_dims
        self.block_dims = block_dims
        super().__init__(
            f"shape {shape_dims[0]:.1f} x {shape_dims[1]:.1f} mm does not fit "
            f"block {block_dims[0]:.1f} x {block_dims[1]:.1f} mm"
        )


@dataclass(frozen=True)
class KnifeSpec:
    """Blade geometry and the rotary axis the machine can actually command."""

    width: float = 5.0
    thickness: float = 0.3
    max_angle_deviation: float = 30.0
    angle_resolution: float = 0.1

    def __post_init__(self):
        if not (self.width > self.thickness > 0.0):
            raise ValueError("knife needs width > thickness > 0")
        if not (0.0 < self.max_angle_deviation <= 90.0):
            raise ValueError("max_angle_deviation must be in (0, 90]")
        if not self.angle_resolution > 0.0:
            raise ValueError("angle_resolution must be positive")


@dataclass(frozen=True)
class Constraints:
    """Placement-independent cutting constraints."""

    node_clearance: float = 0.5
    relocation_radius: float = 5.0
    position_step: float = 0.1
    max_indentation: float = 5.0
    same_edge_min_separation: float = 0.4
    allow_double: bool = False

    def __post_init__(self):
        for name in (
            "node_clearance",
            "relocation_radius",
            "position_step",
            "max_indentation",
            "same_edge_min_separation",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.relocation_radius < self.node_clearance:
            raise ValueError("relocation_radius must be >= node_clearance")


@dataclass(frozen=True)
class PlanOptions:
    use_block_edge: bool = False
    flatten_tol: float = 0.01


@dataclass(frozen=True)
class CutPoint:
    """A planned knife plunge on a specific wall."""

    edge_id: int
    position: Point2
    t_on_edge: float
    knife_angle: float
    angle_deviation: float
    indentation: float
    node_distance: float


class ProblemReason(Enum):
    NODE_ZONE = "NodeZone"
    DOUBLE_EDGE = "DoubleEdge"
    KNIFE_COLLISION = "KnifeCollision"
    NO_FEASIBLE_POSITION = "NoFeasiblePosition"


@dataclass(frozen=True)
class ProblemPoint:
    crossing: Crossing
    reason: ProblemReason


@dataclass(frozen=True)
class Report:
    cut_point_count: int
    min_node_distance: float
    max_indentation: float
    double_edge_cuts: int
    max_angle_deviation_used: float
    placements_tried: int


@dataclass(frozen=True)
class CutPlan:
    placement: Placement
    points: tuple[CutPoint, ...]
    metrics: Report


@dataclass(frozen=True)
class PlanViolation:
    kind: str
    point_index: Optional[int]
    message: str


class PlanningFailed(Exception):
    """The placement search space is exhausted.

    Carries the best placement found (fewest problem points, then
    smallest indentation sum) and its problem list.
    """

    def __init__(
        self,
        best_placement: Optional[Placement],
        problems: tuple[ProblemPoint, ...],
        placements_tried: int,
    ):
        self.best_placement = best_placement
        self.problems = problems
        self.placements_tried = placements_tried
        reasons = sorted({p.reason.value for p in problems})
        super().__init__(
            f"no feasible placement in {placements_tried} candidates; "
            f"{len(problems)} problem point(s) remain ({', '.join(reasons) or 'none'})"
        )


def fit_check(shape: Shape, hmap: HoneycombMap) -> tuple[tuple[float, float], tuple[float, float]]:
    """Necessary size check before any placement search.

    Passes iff the shape's minimum-area oriented bounding box fits the
    outline's bounding box in either orientation; returns both dimension
    pairs, raises ShapeTooLarge otherwise.
    """
    pts: list[tuple[float, float]] = []
    for contour_segs in flatten(shape, 0.01):
        for s in contour_segs:
            pts.append((s.a.x, s.a.y))
    d1, d2 = min_area_obb_dims(pts)
    x0, y0, x1, y1 = hmap.outline_bbox()
    bw, bh = x1 - x0, y1 - y0
    fits = (d1 <= bw + EPS_GEOM and d2 <= bh + EPS_GEOM) or (
        d2 <= bw + EPS_GEOM and d1 <= bh + EPS_GEOM
    )
    if not fits:
        raise ShapeTooLarge((d1, d2), (bw, bh))
    return (d1, d2), (bw, bh)


def _shape_bbox_at(shape_pts: list[np.ndarray], rotation: float) -> tuple[float, float, float, float]:
    r = math.radians(rotation)
    c, s = math.cos(r), math.sin(r)
    rot = np.array([[c, -s], [s, c]])
    mins = np.array([math.inf, math.inf])
    maxs = np.array([-math.inf, -math.inf])
    for pts in shape_pts:
        q = pts @ rot.T
        mins = np.minimum(mins, q.min(axis=0))
        maxs = np.maximum(maxs, q.max(axis=0))
    return (mins[0], mins[1], maxs[0], maxs[1])


def initial_placement(shape: Shape, hmap: HoneycombMap, use_block_edge: bool = False) -> Placement:
    """Starting placement for the search.

    The longest straight side (if any) is rotated parallel to the ribbon
    axis and the shape's bounding box is set one cell in from the
    outline's lower-left corner. With use_block_edge and a straight side
    of at least two cell edges, that side is laid directly on the
    outline's bottom edge instead (the factory-cut block edge doubles as
    one side of the part).
    """
    x0, y0, x1, y1 = hmap.outline_bbox()
    margin = hmap.nominal_cell_edge
    longest = longest_straight_segment(shape)

    rotation = 0.0
    if longest is not None:
        seg = longest[1]
        seg_dir = math.degrees(math.atan2(seg.b.y - seg.a.y, seg.b.x - seg.a.x))
        rotation = (hmap.ribbon_axis - seg_dir) % 180.0

    pts0 = _contour_point_arrays(shape, 0.01)

    if use_block_edge and longest is not None and longest[1].length >= 2.0 * hmap.nominal_cell_edge:
        # Lay the side flat on the bottom edge: of the two horizontal
        # orientations pick the one with the side nearest the bbox bottom.
        best = None
        for rot in (rotation, normalize_deg(rotation + 180.0)):
            bx0, by0, bx1, by1 = _shape_bbox_at(pts0, rot)
            a = longest[1].a.rotated_deg(rot)
            gap = a.y - by0
            if best is None or gap < best[0] - EPS_GEOM:
                best = (gap, rot, bx0, by0, a.y)
        _, rot, bx0, by0, side_y = best
        return Placement(rot, (x0 + margin - bx0, y0 - side_y))

    bx0, by0, _, _ = _shape_bbox_at(pts0, rotation)
    return Placement(rotation, (x0 + margin - bx0, y0 + margin - by0))


def _contour_point_arrays(shape: Shape, tol: float) -> list[np.ndarray]:
    """Flattened closed contours as (N, 2) arrays, outer first."""
    arrays = []
    for contour in shape.contours():
        pts = contour.flatten(tol)
        arrays.append(np.array([[p.x, p.y] for p in pts], dtype=float))
    return arrays


# --- knife angle feasibility -------------------------------------------------


def _grid_round(value: float, res: float) -> int:
    """Index of the nearest multiple of res (half rounds up)."""
    return math.floor(value / res + 0.5)


@lru_cache(maxsize=32)
def _candidate_angle_steps(max_deviation: float, res: float) -> np.ndarray:
    """Grid offsets 0, +1, -1, +2, -2 ... covering the deviation budget."""
    span = int(math.floor(max_deviation / res + 1e-9)) + 1
    ks = np.empty(2 * span + 1, dtype=np.int64)
    ks[0] = 0
    ks[1::2] = np.arange(1, span + 1)
    ks[2::2] = -np.arange(1, span + 1)
    return ks


def _rect_hits_segments(
    angles_rad: np.ndarray,
    cx: float,
    cy: float,
    hl: float,
    hw: float,
    segs: np.ndarray,
) -> np.ndarray:
    """For each angle, does the oriented rect intersect any segment?

    Vectorized slab clipping in the rect frame; segs is (M, 4).
    """
    n_ang = len(angles_rad)
    if segs.shape[0] == 0:
        return np.zeros(n_ang, dtype=bool)
    ca = np.cos(angles_rad)[:, None]
    sa = np.sin(angles_rad)[:, None]
    ax = segs[None, :, 0] - cx
    ay = segs[None, :, 1] - cy
    bx = segs[None, :, 2] - cx
    by = segs[None, :, 3] - cy
    x0 = ca * ax + sa * ay
    y0 = -sa * ax + ca * ay
    x1 = ca * bx + sa * by
    y1 = -sa * bx + ca * by
    dx = x1 - x0
    dy = y1 - y0

    with np.errstate(divide="ignore", invalid="ignore"):
        txa = (-hl - x0) / dx
        txb = (hl - x0) / dx
        tya = (-hw - y0) / dy
        tyb = (hw - y0) / dy
    tx_lo = np.minimum(txa, txb)
    tx_hi = np.maximum(txa, txb)
    ty_lo = np.minimum(tya, tyb)
    ty_hi = np.maximum(tya, tyb)

    par_x = dx == 0.0
    inside_x = np.abs(x0) <= hl
    tx_lo = np.where(par_x, np.where(inside_x, -np.inf, np.inf), tx_lo)
    tx_hi = np.where(par_x, np.where(inside_x, np.inf, -np.inf), tx_hi)
    par_y = dy == 0.0
    inside_y = np.abs(y0) <= hw
    ty_lo = np.where(par_y, np.where(inside_y, -np.inf, np.inf), ty_lo)
    ty_hi = np.where(par_y, np.where(inside_y, np.inf, -np.inf), ty_hi)

    t0 = np.maximum(np.maximum(tx_lo, ty_lo), 0.0)
    t1 = np.minimum(np.minimum(tx_hi, ty_hi), 1.0)
    return np.any(t0 <= t1, axis=1)


def _rect_contains_points(
    angles_rad: np.ndarray, cx: float, cy: float, hl: float, hw: float, pts: np.ndarray
) -> np.ndarray:
    n_ang = len(angles_rad)
    if pts.shape[0] == 0:
        return np.zeros(n_ang, dtype=bool)
    ca = np.cos(angles_rad)[:, None]
    sa = np.sin(angles_rad)[:, None]
    dx = pts[None, :, 0] - cx
    dy = pts[None, :, 1] - cy
    lx = ca * dx + sa * dy
    ly = -sa * dx + ca * dy
    return np.any((np.abs(lx) <= hl) & (np.abs(ly) <= hw), axis=1)


def feasible_knife_angle(
    edge: Edge, position: Point2, hmap: HoneycombMap, knife: KnifeSpec
) -> Optional[tuple[float, float]]:
    """First feasible blade direction at `position` on `edge`, or None.

    Candidates are absolute multiples of the rotary resolution (what the
    machine can command), walked outward from the wall perpendicular:
    nearest grid angle first, then +1, -1, +2, -2 steps, keeping the true
    deviation within max_angle_deviation. A candidate is feasible when the
    blade footprint intersects no wall other than the cut wall and
    contains no node. Returns (absolute angle, true deviation from the
    perpendicular), both degrees.
    """
    a = hmap.node_by_id[edge.node_a].pos
    b = hmap.node_by_id[edge.node_b].pos
    perp = normalize_deg(math.degrees(math.atan2(b.y - a.y, b.x - a.x)) + 90.0)
    res = knife.angle_resolution
    base_k = _grid_round(perp, res)

    hl = knife.width / 2.0
    hw = knife.thickness / 2.0
    reach = math.hypot(hl, hw) + EPS_GEOM
    bbox = (position.x - reach, position.y - reach, position.x + reach, position.y + reach)

    obstacle_rows = [
        hmap.edge_row_by_id[eid]
        for eid in hmap.edge_index.query_bbox(bbox)
        if eid != edge.id
    ]
    segs = hmap.edge_xyxy[obstacle_rows] if obstacle_rows else np.empty((0, 4))

    node_xy = hmap.node_xy
    near_mask = (
        (node_xy[:, 0] >= bbox[0])
        & (node_xy[:, 0] <= bbox[2])
        & (node_xy[:, 1] >= bbox[1])
        & (node_xy[:, 1] <= bbox[3])
    )
    pts = node_xy[near_mask]

    steps = _candidate_angle_steps(knife.max_angle_deviation, res)
    angles = np.mod((base_k + steps) * res, 360.0)
    deviations = np.abs(np.mod(angles - perp + 180.0, 360.0) - 180.0)
    deviations = np.where(deviations > 90.0, 180.0 - deviations, deviations)
    ok_dev = deviations <= knife.max_angle_deviation + 1e-9
    if not ok_dev.any():
        return None

    if segs.shape[0] == 0 and pts.shape[0] == 0:
        idx = int(np.argmax(ok_dev))  # first candidate within the budget
        return float(angles[idx]), float(deviations[idx])

    # Scan in growing chunks; the perpendicular (or a near neighbour) is
    # feasible at almost every cut, so the full fan is rarely evaluated.
    n = len(angles)
    start = 0
    for stop in (1, 31, 181, n):
        stop = min(stop, n)
        if stop <= start:
            continue
        sl = slice(start, stop)
        rad = np.radians(angles[sl])
        blocked = _rect_hits_segments(rad, position.x, position.y, hl, hw, segs)
        blocked |= _rect_contains_points(rad, position.x, position.y, hl, hw, pts)
        feasible = ok_dev[sl] & ~blocked
        if feasible.any():
            idx = start + int(np.argmax(feasible))
            return float(angles[idx]), float(deviations[idx])
        start = stop
    return None


# --- cut point selection -----------------------------------------------------


def select_cut_point(
    crossing: Crossing, hmap: HoneycombMap, knife: KnifeSpec, constraints: Constraints
) -> Union[CutPoint, ProblemPoint]:
    """Pick the plunge point for one crossing, or classify the failure.

    Candidates are points on any wall within relocation_radius of the
    crossing (a Euclidean disk, so a crossing on a glue wall can fall back
    to nearby single walls), sampled on the position_step grid along each
    wall outward from the point nearest the crossing. On the crossing's
    own wall that anchor is the crossing itself. Among feasible candidates
    the one closest to a node wins (clearance permitting); ties prefer
    smaller indentation, then smaller wall id, then smaller t.
    """
    cross_edge = hmap.edge_by_id[crossing.edge_id]
    cx, cy = crossing.point.x, crossing.point.y
    radius = constraints.relocation_radius
    step = constraints.position_step
    max_ind = min(radius, constraints.max_indentation)

    bbox = (cx - radius, cy - radius, cx + radius, cy + radius)
    edge_ids = hmap.edge_index.query_bbox(bbox)

    cand_s: list[np.ndarray] = []
    cand_px: list[np.ndarray] = []
    cand_py: list[np.ndarray] = []
    cand_edge: list[np.ndarray] = []
    cand_len: list[np.ndarray] = []
    cand_allowed: list[np.ndarray] = []
    node_xy = hmap.node_xy

    k_max = int(math.floor(radius / step + 1e-9))
    ks = np.arange(-k_max, k_max + 1)

    for eid in edge_ids:
        edge = hmap.edge_by_id[eid]
        row = hmap.edge_row_by_id[eid]
        ax, ay, bx, by = hmap.edge_xyxy[row]
        dx, dy = bx - ax, by - ay
        length = math.hypot(dx, dy)
        # Anchor: the wall point nearest the crossing (the crossing itself
        # on its own wall).
        t_anchor = ((cx - ax) * dx + (cy - ay) * dy) / (length * length)
        t_anchor = min(1.0, max(0.0, t_anchor))
        s_anchor = t_anchor * length
        s = s_anchor + ks * step
        keep = (s >= 0.0) & (s <= length)
        s = s[keep]
        if s.size == 0:
            continue
        px = ax + (dx / length) * s
        py = ay + (dy / length) * s
        dist_c = np.hypot(px - cx, py - cy)
        keep = dist_c <= max_ind + 1e-12
        if not keep.any():
            continue
        s, px, py = s[keep], px[keep], py[keep]
        allowed = edge.kind is EdgeKind.SINGLE or constraints.allow_double
        cand_s.append(s)
        cand_px.append(px)
        cand_py.append(py)
        cand_edge.append(np.full(s.shape, eid, dtype=int))
        cand_len.append(np.full(s.shape, length))
        cand_allowed.append(np.full(s.shape, allowed, dtype=bool))

    cross_is_double = cross_edge.kind is EdgeKind.DOUBLE and not constraints.allow_double
    if not cand_s:
        return ProblemPoint(
            crossing,
            ProblemReason.DOUBLE_EDGE if cross_is_double else ProblemReason.NO_FEASIBLE_POSITION,
        )

    s = np.concatenate(cand_s)
    px = np.concatenate(cand_px)
    py = np.concatenate(cand_py)
    eids = np.concatenate(cand_edge)
    lens = np.concatenate(cand_len)
    allowed = np.concatenate(cand_allowed)
    indent = np.hypot(px - cx, py - cy)

    if not allowed.any():
        return ProblemPoint(
            crossing,
            ProblemReason.DOUBLE_EDGE if cross_is_double else ProblemReason.NO_FEASIBLE_POSITION,
        )

    # Exact nearest-node distances: every candidate lies on a wall, so its
    # nearest node is no farther than that wall's near endpoint; nodes in
    # the disk's bbox padded by the longest wall are a sufficient set.
    pad = float(lens.max()) + 1.0
    nmask = (
        (node_xy[:, 0] >= bbox[0] - pad)
        & (node_xy[:, 0] <= bbox[2] + pad)
        & (node_xy[:, 1] >= bbox[1] - pad)
        & (node_xy[:, 1] <= bbox[3] + pad)
    )
    nxy = node_xy[nmask]
    d2 = (px[:, None] - nxy[None, :, 0]) ** 2 + (py[:, None] - nxy[None, :, 1]) ** 2
    node_dist = np.sqrt(d2.min(axis=1))

    clear = node_dist >= constraints.node_clearance
    if not (clear & allowed).any():
        # Allowed candidates exist (checked above) but clearance kills all.
        return ProblemPoint(crossing, ProblemReason.NODE_ZONE)

    # Walk candidates in selection order; the first with a feasible blade
    # angle is the argmin of (node_distance, indentation, edge id, t).
    order = np.lexsort((s, eids, indent, node_dist))
    for idx in order:
        if not (clear[idx] and allowed[idx]):
            continue
        pos = Point2(float(px[idx]), float(py[idx]))
        edge = hmap.edge_by_id[int(eids[idx])]
        hit = feasible_knife_angle(edge, pos, hmap, knife)
        if hit is None:
            continue
        angle, deviation = hit
        return CutPoint(
            edge_id=edge.id,
            position=pos,
            t_on_edge=float(s[idx] / lens[idx]),
            knife_angle=angle,
            angle_deviation=deviation,
            indentation=float(indent[idx]),
            node_distance=float(node_dist[idx]),
        )
    return ProblemPoint(crossing, ProblemReason.KNIFE_COLLISION)


# --- placement search --------------------------------------------------------


def _orientation_list(alpha: float, use_block_edge: bool) -> list[float]:
    if use_block_edge:
        raw = [alpha, alpha + 180.0]
    else:
        raw = [
            alpha,
            alpha + 180.0,
            alpha + 90.0,
            alpha + 270.0,
            alpha + 5.0,
            alpha - 5.0,
            alpha + 10.0,
            alpha - 10.0,
            alpha + 15.0,
            alpha - 15.0,
        ]
    out: list[float] = []
    for r in raw:
        n = normalize_deg(r)
        if n not in out:
            out.append(n)
    return out


def _outline_is_axis_rect(hmap: HoneycombMap) -> bool:
    if len(hmap.outline) != 4:
        return False
    x0, y0, x1, y1 = hmap.outline_bbox()
    want = {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}
    return {(p.x, p.y) for p in hmap.outline} == want


@dataclass
class _PlacementResult:
    pairs: list[tuple[Crossing, CutPoint]]
    problems: list[ProblemPoint]
    aborted: bool


def _evaluate_placement(
    hmap: HoneycombMap,
    contours: list[np.ndarray],
    rot: np.ndarray,
    translation: tuple[float, float],
    knife: KnifeSpec,
    constraints: Constraints,
    problem_budget: float,
) -> Optional[_PlacementResult]:
    """Collect cut points and problems for one placement.

    Returns None when the placed contour slides along a wall (no discrete
    crossing exists there). Evaluation stops early once the problem count
    exceeds the budget; an aborted result can never become the best.
    """
    pairs: list[tuple[Crossing, CutPoint]] = []
    problems: list[ProblemPoint] = []
    t = np.array(translation)
    for pts in contours:
        placed = pts @ rot.T + t
        try:
            crossings = crossings_for_chain(hmap, placed, closed=True)
        except ContourOnEdge:
            return None
        for crossing in crossings:
            result = select_cut_point(crossing, hmap, knife, constraints)
            if isinstance(result, CutPoint):
                pairs.append((crossing, result))
            else:
                problems.append(result)
                if len(problems) > problem_budget:
                    return _PlacementResult(pairs, problems, aborted=True)

    # Mutual separation on shared walls: the later cut (traversal order)
    # of an offending pair becomes the problem.
    by_edge: dict[int, list[int]] = {}
    for i, (_, cp) in enumerate(pairs):
        by_edge.setdefault(cp.edge_id, []).append(i)
    drop: set[int] = set()
    for indices in by_edge.values():
        for ai in range(len(indices)):
            for bi in range(ai + 1, len(indices)):
                i, j = indices[ai], indices[bi]
                if j in drop:
                    continue
                d = pairs[i][1].position.distance_to(pairs[j][1].position)
                if d < constraints.same_edge_min_separation - 1e-12:
                    drop.add(j)
                    problems.append(
                        ProblemPoint(pairs[j][0], ProblemReason.NO_FEASIBLE_POSITION)
                    )
                    if len(problems) > problem_budget:
                        return _PlacementResult(pairs, problems, aborted=True)
    if drop:
        pairs = [p for i, p in enumerate(pairs) if i not in drop]
    return _PlacementResult(pairs, problems, aborted=False)


def _metrics(pairs: list[tuple[Crossing, CutPoint]], hmap: HoneycombMap, tried: int) -> Report:
    points = [cp for _, cp in pairs]
    double = sum(
        1 for cp in points if hmap.edge_by_id[cp.edge_id].kind is EdgeKind.DOUBLE
    )
    return Report(
        cut_point_count=len(points),
        min_node_distance=min((cp.node_distance for cp in points), default=math.inf),
        max_indentation=max((cp.indentation for cp in points), default=0.0),
        double_edge_cuts=double,
        max_angle_deviation_used=max((cp.angle_deviation for cp in points), default=0.0),
        placements_tried=tried,
    )


def plan(
    shape: Shape,
    hmap: HoneycombMap,
    knife: KnifeSpec = KnifeSpec(),
    constraints: Constraints = Constraints(),
    options: PlanOptions = PlanOptions(),
) -> CutPlan:
    """Deterministic placement search; first fully-feasible placement wins.

    Orientations start from the initial alignment and fan out (180, 90,
    270, then +-5, +-10, +-15 degrees); for each orientation translations
    scan row-major from the outline's lower-left in steps of one fifth of
    the cell edge. Raises PlanningFailed with the best attempt when the
    space is exhausted, ShapeTooLarge when no placement could ever fit.
    """
    fit_check(shape, hmap)
    min_r = min_curvature_radius(shape)
    if min_r < hmap.nominal_cell_edge:
        log.warning(
            "minimum arc radius %.2f mm is below the %.2f mm cell edge; "
            "cut quality near those arcs may suffer",
            min_r,
            hmap.nominal_cell_edge,
        )

    base = initial_placement(shape, hmap, options.use_block_edge)
    longest = longest_straight_segment(shape)
    block_edge_mode = (
        options.use_block_edge
        and longest is not None
        and longest[1].length >= 2.0 * hmap.nominal_cell_edge
    )
    orientations = _orientation_list(base.rotation, block_edge_mode)

    contours = _contour_point_arrays(shape, options.flatten_tol)
    x0, y0, x1, y1 = hmap.outline_bbox()
    step = hmap.nominal_cell_edge / 5.0
    axis_rect = _outline_is_axis_rect(hmap)

    tried = 0
    best: Optional[tuple[int, float, Placement, tuple[ProblemPoint, ...]]] = None

    for rotation in orientations:
        r = math.radians(rotation)
        rot = np.array([[math.cos(r), -math.sin(r)], [math.sin(r), math.cos(r)]])
        bx0, by0, bx1, by1 = _shape_bbox_at(contours, rotation)
        w, h = bx1 - bx0, by1 - by0
        if w > (x1 - x0) + EPS_GEOM or h > (y1 - y0) + EPS_GEOM:
            continue

        nx = int(math.floor((x1 - x0 - w) / step + 1e-9))
        ny = int(math.floor((y1 - y0 - h) / step + 1e-9))

        if block_edge_mode:
            side_y = longest[1].a.rotated_deg(rotation).y
            ty_list = [y0 - side_y]
            # The side must stay on the bottom edge with the shape inside.
            if not (y0 - EPS_GEOM <= by0 + (y0 - side_y) and by1 + (y0 - side_y) <= y1 + EPS_GEOM):
                ty_list = []
        else:
            ty_list = [y0 - by0 + iy * step for iy in range(ny + 1)]

        for ty in ty_list:
            for ix in range(nx + 1):
                tx = x0 - bx0 + ix * step
                if not axis_rect:
                    corners = (
                        Point2(bx0 + tx, by0 + ty),
                        Point2(bx1 + tx, by0 + ty),
                        Point2(bx1 + tx, by1 + ty),
                        Point2(bx0 + tx, by1 + ty),
                    )
                    if not all(point_in_polygon(p, hmap.outline, True) for p in corners):
                        continue
                tried += 1
                budget = math.inf if best is None else float(best[0])
                result = _evaluate_placement(
                    hmap, contours, rot, (tx, ty), knife, constraints, budget
                )
                if result is None:
                    continue
                placement = Placement(rotation, (tx, ty))
                if not result.problems:
                    points = tuple(cp for _, cp in result.pairs)
                    return CutPlan(placement, points, _metrics(result.pairs, hmap, tried))
                if result.aborted:
                    continue
                indent_sum = sum(cp.indentation for _, cp in result.pairs)
                key = (len(result.problems), indent_sum)
                if best is None or key < (best[0], best[1]):
                    best = (len(result.problems), indent_sum, placement, tuple(result.problems))

    if best is None:
        raise PlanningFailed(None, (), tried)
    raise PlanningFailed(best[2], best[3], tried)


# --- independent verification -------------------------------------------------


def _fold_deviation(angle: float, perp: float) -> float:
    """Deviation of an undirected blade direction from the perpendicular."""
    return direction_diff_deg(angle, perp)


def _verify_points(
    points: Sequence[CutPoint],
    placed_contours: list[np.ndarray],
    hmap: HoneycombMap,
    knife: KnifeSpec,
    constraints: Constraints,
    pos_slack: float,
    ang_slack: float,
    membership_tol: float,
    indentation_known: bool,
) -> list[PlanViolation]:
    """Re-check every stored constraint from scratch.

    Deliberately avoids the planner's candidate search: clearance comes
    from a fresh nearest-node scan, collisions from exact footprint tests
    against bbox-filtered walls, indentation from distances to the placed
    contour polylines.
    """
    violations: list[PlanViolation] = []
    edge_arr = hmap.edge_xyxy
    node_xy = hmap.node_xy

    seg_list: list[np.ndarray] = []
    for pts in placed_contours:
        closed = np.vstack([pts, pts[:1]])
        seg_list.append(np.hstack([closed[:-1], closed[1:]]))
    all_contour_segs = np.vstack(seg_list) if seg_list else np.empty((0, 4))

    def dist_to_contours(p: Point2) -> float:
        if all_contour_segs.shape[0] == 0:
            return math.inf
        ax, ay = all_contour_segs[:, 0], all_contour_segs[:, 1]
        bx, by = all_contour_segs[:, 2], all_contour_segs[:, 3]
        dx, dy = bx - ax, by - ay
        ln2 = dx * dx + dy * dy
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((p.x - ax) * dx + (p.y - ay) * dy) / ln2
        t = np.clip(np.nan_to_num(t), 0.0, 1.0)
        nx, ny = ax + t * dx, ay + t * dy
        return float(np.sqrt(((p.x - nx) ** 2 + (p.y - ny) ** 2).min()))

    for i, cp in enumerate(points):
        edge = hmap.edge_by_id.get(cp.edge_id)
        if edge is None:
            violations.append(PlanViolation("EdgeMembership", i, f"edge {cp.edge_id} does not exist"))
            continue
        seg = hmap.edge_segment(cp.edge_id)
        d_edge, t = point_segment_distance(cp.position, seg)
        if d_edge > membership_tol:
            violations.append(
                PlanViolation(
                    "EdgeMembership", i, f"position is {d_edge:.6f} mm off edge {cp.edge_id}"
                )
            )
            continue
        if abs(t - cp.t_on_edge) * seg.length > membership_tol + EPS_GEOM:
            violations.append(
                PlanViolation("Bookkeeping", i, f"stored t={cp.t_on_edge:.6f} but recomputed {t:.6f}")
            )

        _, nd = nearest_node(hmap, cp.position)
        if abs(nd - cp.node_distance) > pos_slack + EPS_GEOM:
            violations.append(
                PlanViolation(
                    "Bookkeeping",
                    i,
                    f"stored node_distance={cp.node_distance:.6f} but recomputed {nd:.6f}",
                )
            )
        if min(nd, cp.node_distance) < constraints.node_clearance - pos_slack - EPS_GEOM:
            violations.append(
                PlanViolation(
                    "NodeZone",
                    i,
                    f"node distance {min(nd, cp.node_distance):.4f} mm is below "
                    f"{constraints.node_clearance} mm",
                )
            )

        if edge.kind is EdgeKind.DOUBLE and not constraints.allow_double:
            violations.append(PlanViolation("DoubleEdge", i, f"cut on double edge {edge.id}"))

        perp = normalize_deg(seg.direction_deg + 90.0)
        dev = _fold_deviation(cp.knife_angle, perp)
        if max(dev, cp.angle_deviation) > knife.max_angle_deviation + ang_slack + 1e-9:
            violations.append(
                PlanViolation(
                    "AngleDeviation",
                    i,
                    f"deviation {max(dev, cp.angle_deviation):.2f} deg exceeds "
                    f"{knife.max_angle_deviation} deg",
                )
            )

        hl = max(knife.width / 2.0 - pos_slack, EPS_GEOM)
        hw = max(knife.thickness / 2.0 - pos_slack, EPS_GEOM)
        rect = OrientedRect(cp.position, hl, hw, cp.knife_angle)
        rx0, ry0, rx1, ry1 = rect.bbox()
        near = (
            (np.minimum(edge_arr[:, 0], edge_arr[:, 2]) <= rx1)
            & (np.maximum(edge_arr[:, 0], edge_arr[:, 2]) >= rx0)
            & (np.minimum(edge_arr[:, 1], edge_arr[:, 3]) <= ry1)
            & (np.maximum(edge_arr[:, 1], edge_arr[:, 3]) >= ry0)
        )
        for row in np.nonzero(near)[0]:
            other = hmap.edges[int(row)]
            if other.id == cp.edge_id:
                continue
            ox0, oy0, ox1, oy1 = edge_arr[int(row)]
            if rect_intersects_segment(rect, Segment(Point2(ox0, oy0), Point2(ox1, oy1))):
                violations.append(
                    PlanViolation(
                        "KnifeCollision", i, f"footprint touches edge {other.id}"
                    )
                )
                break
        node_near = (
            (node_xy[:, 0] >= rx0)
            & (node_xy[:, 0] <= rx1)
            & (node_xy[:, 1] >= ry0)
            & (node_xy[:, 1] <= ry1)
        )
        for nx_, ny_ in node_xy[node_near]:
            if rect.contains_point(Point2(float(nx_), float(ny_))):
                violations.append(
                    PlanViolation("KnifeCollision", i, "footprint contains a node")
                )
                break

        if cp.indentation > constraints.max_indentation + EPS_GEOM:
            violations.append(
                PlanViolation(
                    "Indentation",
                    i,
                    f"indentation {cp.indentation:.4f} mm exceeds {constraints.max_indentation} mm",
                )
            )
        d_contour = dist_to_contours(cp.position)
        if indentation_known and d_contour > cp.indentation + DEFAULT_CONTOUR_TOL + EPS_GEOM:
            violations.append(
                PlanViolation(
                    "Bookkeeping",
                    i,
                    f"stored indentation {cp.indentation:.4f} mm but contour is "
                    f"{d_contour:.4f} mm away",
                )
            )
        if d_contour > constraints.max_indentation + pos_slack + DEFAULT_CONTOUR_TOL + EPS_GEOM:
            violations.append(
                PlanViolation(
                    "Indentation",
                    i,
                    f"cut sits {d_contour:.4f} mm from the contour, beyond "
                    f"{constraints.max_indentation} mm",
                )
            )

    by_edge: dict[int, list[int]] = {}
    for i, cp in enumerate(points):
        by_edge.setdefault(cp.edge_id, []).append(i)
    for edge_id, indices in by_edge.items():
        for ai in range(len(indices)):
            for bi in range(ai + 1, len(indices)):
                i, j = indices[ai], indices[bi]
                d = points[i].position.distance_to(points[j].position)
                if d < constraints.same_edge_min_separation - 2.0 * pos_slack - 1e-12:
                    violations.append(
                        PlanViolation(
                            "Separation",
                            j,
                            f"cuts {i} and {j} on edge {edge_id} are {d:.4f} mm apart",
                        )
                    )
    return violations


DEFAULT_CONTOUR_TOL = 0.01  # flattening tolerance used when re-measuring indentation


def verify_plan(
    cutplan: CutPlan,
    shape: Shape,
    hmap: HoneycombMap,
    knife: KnifeSpec = KnifeSpec(),
    constraints: Constraints = Constraints(),
) -> Union[Report, list[PlanViolation]]:
    """Recompute every cut point constraint from scratch.

    Returns the recomputed Report (equal to the plan's own metrics for an
    honest plan) or the list of violations. Never reuses the planner's
    candidate search.
    """
    placed = apply_placement(shape, cutplan.placement)
    placed_contours = _contour_point_arrays(placed, DEFAULT_CONTOUR_TOL)
    violations = _verify_points(
        cutplan.points,
        placed_contours,
        hmap,
        knife,
        constraints,
        pos_slack=0.0,
        ang_slack=0.0,
        membership_tol=EPS_GEOM,
        indentation_known=True,
    )
    if violations:
        return violations
    double = sum(
        1
        for cp in cutplan.points
        if hmap.edge_by_id[cp.edge_id].kind is EdgeKind.DOUBLE
    )
    return Report(
        cut_point_count=len(cutplan.points),
        min_node_distance=min((cp.node_distance for cp in cutplan.points), default=math.inf),
        max_indentation=max((cp.indentation for cp in cutplan.points), default=0.0),
        double_edge_cuts=double,
        max_angle_deviation_used=max(
            (cp.angle_deviation for cp in cutplan.points), default=0.0
        ),
        placements_tried=cutplan.metrics.placements_tried,
    )


# --- plan file I/O -----------------------------------------------------------


def report_to_dict(report: Report) -> dict:
    return {
        "cut_point_count": report.cut_point_count,
        "min_node_distance_mm": None if math.isinf(report.min_node_distance) else report.min_node_distance,
        "max_indentation_mm": report.max_indentation,
        "double_edge_cuts": report.double_edge_cuts,
        "max_angle_deviation_used_deg": report.max_angle_deviation_used,
        "placements_tried": report.placements_tried,
    }


def _report_from_dict(d: dict) -> Report:
    mnd = d["min_node_distance_mm"]
    return Report(
        cut_point_count=d["cut_point_count"],
        min_node_distance=math.inf if mnd is None else float(mnd),
        max_indentation=float(d["max_indentation_mm"]),
        double_edge_cuts=d["double_edge_cuts"],
        max_angle_deviation_used=float(d["max_angle_deviation_used_deg"]),
        placements_tried=d["placements_tried"],
    )


def save_plan(cutplan: CutPlan) -> str:
    doc = {
        "format": PLAN_FORMAT,
        "version": PLAN_VERSION,
        "units": "mm",
        "placement": {
            "rotation_deg": cutplan.placement.rotation,
            "dx": cutplan.placement.translation[0],
            "dy": cutplan.placement.translation[1],
        },
        "points": [
            {
                "edge_id": cp.edge_id,
                "x": cp.position.x,
                "y": cp.position.y,
                "t": cp.t_on_edge,
                "angle_deg": cp.knife_angle,
                "deviation_deg": cp.angle_deviation,
                "indentation_mm": cp.indentation,
                "node_distance_mm": cp.node_distance,
            }
            for cp in cutplan.points
        ],
        "metrics": report_to_dict(cutplan.metrics),
    }
    return json.dumps(doc, indent=1) + "\n"


_PLAN_TOP_FIELDS = {"format", "version", "units", "placement", "points", "metrics"}
_POINT_FIELDS = {
    "edge_id",
    "x",
    "y",
    "t",
    "angle_deg",
    "deviation_deg",
    "indentation_mm",
    "node_distance_mm",
}


def load_plan(text: str) -> CutPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg) from e
    if not isinstance(doc, dict):
        raise ParseError(0, "top level must be an object")
    unknown = set(doc) - _PLAN_TOP_FIELDS
    if unknown:
        raise ParseError(0, f"unknown top-level fields: {sorted(unknown)}")
    missing = _PLAN_TOP_FIELDS - set(doc)
    if missing:
        raise ParseError(0, f"missing top-level fields: {sorted(missing)}")
    if doc["format"] != PLAN_FORMAT:
        raise ParseError(0, f"not a {PLAN_FORMAT} document")
    if doc["version"] != PLAN_VERSION:
        raise ParseError(0, f"unsupported plan version {doc['version']!r}")
    pl = doc["placement"]
    if set(pl) != {"rotation_deg", "dx", "dy"}:
        raise ParseError(0, "placement: expected fields rotation_deg, dx, dy")
    placement = Placement(float(pl["rotation_deg"]), (float(pl["dx"]), float(pl["dy"])))
    points = []
    for i, p in enumerate(doc["points"]):
        if not isinstance(p, dict) or set(p) != _POINT_FIELDS:
            raise ParseError(0, f"point #{i}: unexpected fields")
        points.append(
            CutPoint(
                edge_id=int(p["edge_id"]),
                position=Point2(float(p["x"]), float(p["y"])),
                t_on_edge=float(p["t"]),
                knife_angle=float(p["angle_deg"]),
                angle_deviation=float(p["deviation_deg"]),
                indentation=float(p["indentation_mm"]),
                node_distance=float(p["node_distance_mm"]),
            )
        )
    return CutPlan(placement, tuple(points), _report_from_dict(doc["metrics"]))
