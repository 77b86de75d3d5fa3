"""Independent brute-force oracles used to cross-check the library.

Each oracle replaces the implementation's search strategy (spatial index,
lexsort selection, chunked angle scan) with an exhaustive scan, while
reproducing the documented grid conventions with plain scalar arithmetic.
"""

from __future__ import annotations

import math

import numpy as np

from honeycut.geom import (
    EPS_GEOM,
    CollinearOverlap,
    OrientedRect,
    Point2,
    Segment,
    normalize_deg,
    point_segment_distance,
    rect_intersects_segment,
    seg_seg_intersection,
)
from honeycut.honeycomb import ContourOnEdge, Crossing, EdgeKind, HoneycombMap
from honeycut.planner import Constraints, CutPoint, KnifeSpec, ProblemPoint, ProblemReason


def brute_nearest_node(hmap: HoneycombMap, p: Point2) -> tuple[int, float]:
    best_id = None
    best_d2 = math.inf
    for n in sorted(hmap.nodes, key=lambda n: n.id):
        d2 = (n.pos.x - p.x) ** 2 + (n.pos.y - p.y) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best_id = n.id
    if best_id is None:
        raise ValueError("empty map")
    return best_id, math.sqrt(best_d2)


def brute_edges_crossing(hmap: HoneycombMap, polyline) -> list[Crossing]:
    """All-edge scan with the same ordering and dedupe semantics."""
    out: list[Crossing] = []
    for seg in polyline:
        seg_len = seg.length
        hits = []
        for e in sorted(hmap.edges, key=lambda e: e.id):
            es = hmap.edge_segment(e.id)
            try:
                pt = seg_seg_intersection(seg, es)
            except CollinearOverlap:
                raise ContourOnEdge(e.id, 0) from None
            if pt is None:
                continue
            t_seg = ((pt.x - seg.a.x) * (seg.b.x - seg.a.x) + (pt.y - seg.a.y) * (seg.b.y - seg.a.y)) / (
                seg_len * seg_len
            )
            t_edge = ((pt.x - es.a.x) * (es.b.x - es.a.x) + (pt.y - es.a.y) * (es.b.y - es.a.y)) / (
                es.length * es.length
            )
            t_edge = min(1.0, max(0.0, t_edge))
            hits.append((t_seg, e.id, pt, t_edge))
        hits.sort(key=lambda h: (h[0], h[1]))
        for _, eid, pt, t_edge in hits:
            dup = any(
                c.edge_id == eid and c.point.distance_to(pt) <= EPS_GEOM for c in out
            )
            if not dup:
                out.append(Crossing(eid, pt, t_edge))
    return out


def brute_index_query(items: dict[int, Segment], probe_bbox) -> list[int]:
    """Exact overlap scan an index query must be a superset of."""
    x0, y0, x1, y1 = probe_bbox
    out = []
    for iid, seg in items.items():
        bx0, by0, bx1, by1 = seg.bbox()
        if bx0 <= x1 and bx1 >= x0 and by0 <= y1 and by1 >= y0:
            out.append(iid)
    return sorted(out)


def brute_feasible_knife_angle(edge, position: Point2, hmap: HoneycombMap, knife: KnifeSpec):
    """Full scan of every grid angle, exact predicates, no broad phase."""
    a = hmap.node_by_id[edge.node_a].pos
    b = hmap.node_by_id[edge.node_b].pos
    perp = normalize_deg(math.degrees(math.atan2(b.y - a.y, b.x - a.x)) + 90.0)
    res = knife.angle_resolution
    base_k = math.floor(perp / res + 0.5)
    span = int(math.floor(knife.max_angle_deviation / res + 1e-9)) + 1
    steps = [0]
    for k in range(1, span + 1):
        steps.extend((k, -k))
    hl, hw = knife.width / 2.0, knife.thickness / 2.0
    for k in steps:
        angle = float(np.mod((base_k + k) * res, 360.0))
        dev = float(np.abs(np.mod(angle - perp + 180.0, 360.0) - 180.0))
        if dev > 90.0:
            dev = 180.0 - dev
        if dev > knife.max_angle_deviation + 1e-9:
            continue
        rect = OrientedRect(position, hl, hw, angle)
        blocked = False
        for other in hmap.edges:
            if other.id == edge.id:
                continue
            if rect_intersects_segment(rect, hmap.edge_segment(other.id)):
                blocked = True
                break
        if not blocked:
            for n in hmap.nodes:
                if rect.contains_point(n.pos):
                    blocked = True
                    break
        if not blocked:
            return angle, dev
    return None


def brute_select_cut_point(
    crossing: Crossing, hmap: HoneycombMap, knife: KnifeSpec, constraints: Constraints
):
    """Exhaustive enumeration of the full candidate grid over every wall."""
    cross_edge = hmap.edge_by_id[crossing.edge_id]
    cx, cy = crossing.point.x, crossing.point.y
    radius = constraints.relocation_radius
    step = constraints.position_step
    max_ind = min(radius, constraints.max_indentation)
    k_max = int(math.floor(radius / step + 1e-9))

    candidates = []  # (node_dist, indent, edge_id, s, length, px, py, allowed)
    for e in sorted(hmap.edges, key=lambda e: e.id):
        pa = hmap.node_by_id[e.node_a].pos
        pb = hmap.node_by_id[e.node_b].pos
        dx, dy = pb.x - pa.x, pb.y - pa.y
        length = math.hypot(dx, dy)
        t_anchor = ((cx - pa.x) * dx + (cy - pa.y) * dy) / (length * length)
        t_anchor = min(1.0, max(0.0, t_anchor))
        s_anchor = t_anchor * length
        for k in range(-k_max, k_max + 1):
            s = s_anchor + k * step
            if not (0.0 <= s <= length):
                continue
            px = pa.x + (dx / length) * s
            py = pa.y + (dy / length) * s
            indent = float(np.hypot(px - cx, py - cy))
            if indent > max_ind + 1e-12:
                continue
            best_d2 = math.inf
            for n in hmap.nodes:
                d2 = (px - n.pos.x) ** 2 + (py - n.pos.y) ** 2
                if d2 < best_d2:
                    best_d2 = d2
            node_dist = math.sqrt(best_d2)
            allowed = e.kind is EdgeKind.SINGLE or constraints.allow_double
            candidates.append((node_dist, indent, e.id, s, length, px, py, allowed))

    cross_is_double = cross_edge.kind is EdgeKind.DOUBLE and not constraints.allow_double
    allowed_cands = [c for c in candidates if c[7]]
    if not allowed_cands:
        reason = ProblemReason.DOUBLE_EDGE if cross_is_double else ProblemReason.NO_FEASIBLE_POSITION
        return ProblemPoint(crossing, reason)
    clear = [c for c in allowed_cands if c[0] >= constraints.node_clearance]
    if not clear:
        return ProblemPoint(crossing, ProblemReason.NODE_ZONE)
    clear.sort(key=lambda c: (c[0], c[1], c[2], c[3]))
    for node_dist, indent, eid, s, length, px, py, _ in clear:
        pos = Point2(px, py)
        hit = brute_feasible_knife_angle(hmap.edge_by_id[eid], pos, hmap, knife)
        if hit is None:
            continue
        angle, dev = hit
        return CutPoint(
            edge_id=eid,
            position=pos,
            t_on_edge=s / length,
            knife_angle=angle,
            angle_deviation=dev,
            indentation=indent,
            node_distance=node_dist,
        )
    return ProblemPoint(crossing, ProblemReason.KNIFE_COLLISION)


def sampled_rect_segment_check(rect: OrientedRect, seg: Segment, samples: int = 1024):
    """Sampling oracle for rect/segment intersection.

    Returns True (definite hit), False (definite miss) or None when the
    case sits inside the sampling band and cannot be decided.
    """
    ts = np.linspace(0.0, 1.0, samples)
    xs = seg.a.x + ts * (seg.b.x - seg.a.x)
    ys = seg.a.y + ts * (seg.b.y - seg.a.y)
    r = math.radians(rect.angle)
    c, s = math.cos(r), math.sin(r)
    dx = xs - rect.center.x
    dy = ys - rect.center.y
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    eps = seg.length / (samples - 1)
    inside_shrunk = (np.abs(lx) <= rect.half_length - eps) & (np.abs(ly) <= rect.half_width - eps)
    inside_grown = (np.abs(lx) <= rect.half_length + eps) & (np.abs(ly) <= rect.half_width + eps)
    if inside_shrunk.any():
        return True
    if not inside_grown.any():
        return False
    return None


def sweep_min_obb_dims(points, step_deg: float = 0.05):
    """Dense rotation sweep for the minimum-area bounding rectangle."""
    pts = np.asarray(points, dtype=float)
    best = None
    for ang in np.arange(0.0, 180.0, step_deg):
        r = math.radians(ang)
        c, s = math.cos(r), math.sin(r)
        u = pts[:, 0] * c + pts[:, 1] * s
        v = -pts[:, 0] * s + pts[:, 1] * c
        du = u.max() - u.min()
        dv = v.max() - v.min()
        if best is None or du * dv < best[0]:
            best = (du * dv, du, dv)
    return best[1], best[2]


def max_polyline_deviation_from_arc(center: Point2, radius: float, start_angle: float,
                                    sweep: float, polyline_pts, n_samples: int = 10000) -> float:
    """Max distance from dense arc samples to the flattened polyline."""
    fs = np.linspace(0.0, 1.0, n_samples)
    angs = start_angle + sweep * fs
    ax = center.x + radius * np.cos(angs)
    ay = center.y + radius * np.sin(angs)
    pts = np.array([[p.x, p.y] for p in polyline_pts])
    sx, sy = pts[:-1, 0], pts[:-1, 1]
    ex, ey = pts[1:, 0], pts[1:, 1]
    dx, dy = ex - sx, ey - sy
    ln2 = np.maximum(dx * dx + dy * dy, 1e-300)
    worst = 0.0
    for px, py in zip(ax, ay):
        t = np.clip(((px - sx) * dx + (py - sy) * dy) / ln2, 0.0, 1.0)
        qx, qy = sx + t * dx, sy + t * dy
        d = np.sqrt(((px - qx) ** 2 + (py - qy) ** 2).min())
        worst = max(worst, float(d))
    return worst
