"""The honeycomb map: a planar graph of nodal points and classified cell
walls, plus a synthetic generator, validation, file I/O and the geometric
queries the planner relies on.

A map is the digital stand-in for a scanned block: node coordinates carry
real measured positions, and walls are marked single (one foil) or double
(a glue line, two foils bonded before expansion). Double walls run along
the ribbon direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError
from .geom import (
    EPS_GEOM,
    CollinearOverlap,
    Point2,
    Segment,
    SpatialIndex,
    normalize_deg,
    point_in_polygon,
    seg_seg_intersection,
)

MAP_FORMAT = "honeycomb-map"
MAP_VERSION = 1


class InvalidParams(ValueError):
    """Generator parameters violate their invariants."""


class SchemaVersionUnsupported(ValueError):
    """Map document has a version this code does not understand."""


class EmptyMap(ValueError):
    """Query requires a map with at least one node."""


class ContourOnEdge(ValueError):
    """A polyline segment lies collinear on a wall; there is no discrete
    crossing point to plan a cut at."""

    def __init__(self, edge_id: int, segment_index: int):
        self.edge_id = edge_id
        self.segment_index = segment_index
        super().__init__(f"polyline segment {segment_index} lies along edge {edge_id}")


class EdgeKind(Enum):
    SINGLE = "single"
    DOUBLE = "double"


@dataclass(frozen=True)
class Node:
    id: int
    pos: Point2


@dataclass(frozen=True)
class Edge:
    id: int
    node_a: int
    node_b: int
    kind: EdgeKind


@dataclass(frozen=True)
class Crossing:
    """One proper intersection of a polyline with a wall."""

    edge_id: int
    point: Point2
    t_on_edge: float


@dataclass(frozen=True)
class Violation:
    """One invariant breach found by validate(); data, not an exception."""

    kind: str
    ids: tuple[int, ...]
    message: str


@dataclass(frozen=True)
class GeneratorParams:
    columns: int
    rows: int
    cell_edge: float = 10.0
    jitter_sigma: float = 0.1
    seed: int = 0
    ribbon_axis: float = 0.0

    def __post_init__(self):
        if self.columns < 1 or self.rows < 1:
            raise InvalidParams("columns and rows must be >= 1")
        if not self.cell_edge > 0.0:
            raise InvalidParams("cell_edge must be positive")
        if self.jitter_sigma < 0.0:
            raise InvalidParams("jitter_sigma must be >= 0")


@dataclass(frozen=True, eq=True)
class HoneycombMap:
    """Immutable planar graph of nodes and walls with the block outline.

    Invariants (checked by validate, relied on by the planner): the graph is
    simple, every node has degree 1..3, every node lies inside or on the
    outline, and no two distinct walls properly cross.
    """

    nominal_cell_edge: float
    ribbon_axis: float
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    outline: tuple[Point2, ...]

    # Derived, lazily built lookup structures. They live in __dict__ via
    # cached_property and do not take part in equality.

    @cached_property
    def node_by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def edge_by_id(self) -> dict[int, Edge]:
        return {e.id: e for e in self.edges}

    @cached_property
    def node_xy(self) -> np.ndarray:
        """(N, 2) array of node positions, in ascending node id order."""
        ordered = sorted(self.nodes, key=lambda n: n.id)
        return np.array([[n.pos.x, n.pos.y] for n in ordered], dtype=float).reshape(-1, 2)

    @cached_property
    def sorted_node_ids(self) -> np.ndarray:
        return np.array(sorted(n.id for n in self.nodes), dtype=int)

    @cached_property
    def edge_xyxy(self) -> np.ndarray:
        """(E, 4) array [ax, ay, bx, by] in edges-tuple order."""
        rows = []
        nb = self.node_by_id
        for e in self.edges:
            a = nb[e.node_a].pos
            b = nb[e.node_b].pos
            rows.append([a.x, a.y, b.x, b.y])
        return np.array(rows, dtype=float).reshape(-1, 4)

    @cached_property
    def edge_row_by_id(self) -> dict[int, int]:
        return {e.id: i for i, e in enumerate(self.edges)}

    @cached_property
    def edge_index(self) -> SpatialIndex:
        items = []
        arr = self.edge_xyxy
        for i, e in enumerate(self.edges):
            ax, ay, bx, by = arr[i]
            items.append(
                (e.id, (min(ax, bx), min(ay, by), max(ax, bx), max(ay, by)))
            )
        return SpatialIndex(self.nominal_cell_edge, items)

    def edge_segment(self, edge_id: int) -> Segment:
        e = self.edge_by_id[edge_id]
        return Segment(self.node_by_id[e.node_a].pos, self.node_by_id[e.node_b].pos)

    def outline_bbox(self) -> tuple[float, float, float, float]:
        xs = [p.x for p in self.outline]
        ys = [p.y for p in self.outline]
        return (min(xs), min(ys), max(xs), max(ys))

    def translated(self, dx: float, dy: float) -> "HoneycombMap":
        """A copy of this map rigidly shifted by (dx, dy)."""
        return HoneycombMap(
            nominal_cell_edge=self.nominal_cell_edge,
            ribbon_axis=self.ribbon_axis,
            nodes=tuple(Node(n.id, Point2(n.pos.x + dx, n.pos.y + dy)) for n in self.nodes),
            edges=self.edges,
            outline=tuple(Point2(p.x + dx, p.y + dy) for p in self.outline),
        )


# Flat-top hexagon vertices in half-step lattice units (x unit = edge/2,
# y unit = edge*sqrt(3)/2), listed at 0, 60, ... 300 degrees around the cell
# centre. Consecutive pairs form the six walls; slots (1,2) and (4,5) are the
# two horizontal glue-line walls.
_VERTEX_OFFSETS = ((2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1))
_DOUBLE_SLOTS = frozenset({(1, 2), (4, 5)})


def generate(params: GeneratorParams) -> HoneycombMap:
    """Build a jittered hexagonal map of columns x rows cells.

    The ideal lattice has every wall exactly cell_edge long; each node is
    then displaced by isotropic Gaussian noise (sigma = jitter_sigma,
    rejected beyond 3*sigma) from a PRNG seeded with params.seed, emulating
    scan measurement error. Glue-line walls (parallel to the ribbon axis on
    the ideal lattice) are marked double. The outline is the block's
    bounding rectangle, and coordinates are shifted so its lower-left
    corner is at (0, 0).
    """
    a = params.cell_edge
    hx = a / 2.0
    hy = a * math.sqrt(3.0) / 2.0

    key_to_id: dict[tuple[int, int], int] = {}
    int_coords: list[tuple[int, int]] = []
    edge_pairs: dict[tuple[int, int], int] = {}
    edge_list: list[tuple[int, int, int, EdgeKind]] = []

    for j in range(params.rows):
        for i in range(params.columns):
            cx = 3 * i
            cy = 2 * j + (i & 1)
            vids = []
            for ox, oy in _VERTEX_OFFSETS:
                key = (cx + ox, cy + oy)
                vid = key_to_id.get(key)
                if vid is None:
                    vid = len(int_coords)
                    key_to_id[key] = vid
                    int_coords.append(key)
                vids.append(vid)
            for k in range(6):
                k2 = (k + 1) % 6
                na, nb = vids[k], vids[k2]
                pair = (na, nb) if na < nb else (nb, na)
                if pair in edge_pairs:
                    continue
                kind = EdgeKind.DOUBLE if (k, k2) in _DOUBLE_SLOTS else EdgeKind.SINGLE
                edge_pairs[pair] = len(edge_list)
                edge_list.append((len(edge_list), pair[0], pair[1], kind))

    xy = np.array(
        [[xi * hx, yi * hy] for xi, yi in int_coords], dtype=float
    ).reshape(-1, 2)

    if params.jitter_sigma > 0.0:
        rng = np.random.default_rng(params.seed)
        sigma = params.jitter_sigma
        limit = 3.0 * sigma
        for idx in range(len(xy)):
            while True:
                d = rng.normal(0.0, sigma, 2)
                if math.hypot(d[0], d[1]) <= limit:
                    break
            xy[idx, 0] += d[0]
            xy[idx, 1] += d[1]

    min_x, min_y = xy[:, 0].min(), xy[:, 1].min()
    max_x, max_y = xy[:, 0].max(), xy[:, 1].max()
    corners = np.array(
        [[min_x, min_y], [max_x, min_y], [max_x, max_y], [min_x, max_y]], dtype=float
    )

    axis = normalize_deg(params.ribbon_axis)
    if axis != 0.0:
        r = math.radians(axis)
        rot = np.array([[math.cos(r), -math.sin(r)], [math.sin(r), math.cos(r)]])
        xy = xy @ rot.T
        corners = corners @ rot.T

    shift = corners.min(axis=0)
    xy -= shift
    corners -= shift

    nodes = tuple(
        Node(i, Point2(float(xy[i, 0]), float(xy[i, 1]))) for i in range(len(xy))
    )
    edges = tuple(Edge(eid, na, nb, kind) for eid, na, nb, kind in edge_list)
    outline = tuple(Point2(float(cx), float(cy)) for cx, cy in corners)
    return HoneycombMap(
        nominal_cell_edge=float(a),
        ribbon_axis=axis,
        nodes=nodes,
        edges=edges,
        outline=outline,
    )


def validate(hmap: HoneycombMap) -> list[Violation]:
    """Check every map invariant; an empty list means the map is sound.

    Violations are returned as data so a caller can report all of them at
    once (a scanned map is rejected, never silently repaired).
    """
    out: list[Violation] = []

    seen_nodes: dict[int, Node] = {}
    for n in hmap.nodes:
        if n.id in seen_nodes:
            out.append(Violation("DuplicateNodeId", (n.id,), f"node id {n.id} repeated"))
        seen_nodes[n.id] = n

    degree: dict[int, int] = {n.id: 0 for n in hmap.nodes}
    seen_edges: set[int] = set()
    seen_pairs: dict[tuple[int, int], int] = {}
    valid_edges: list[Edge] = []
    for e in hmap.edges:
        if e.id in seen_edges:
            out.append(Violation("DuplicateEdgeId", (e.id,), f"edge id {e.id} repeated"))
        seen_edges.add(e.id)
        if e.node_a not in seen_nodes or e.node_b not in seen_nodes:
            out.append(
                Violation("DanglingEdge", (e.id,), f"edge {e.id} references a missing node")
            )
            continue
        if e.node_a == e.node_b:
            out.append(Violation("DegenerateEdge", (e.id,), f"edge {e.id} is a loop"))
            continue
        a = seen_nodes[e.node_a].pos
        b = seen_nodes[e.node_b].pos
        if a.distance_to(b) <= EPS_GEOM:
            out.append(
                Violation("DegenerateEdge", (e.id,), f"edge {e.id} is shorter than {EPS_GEOM} mm")
            )
            continue
        pair = (min(e.node_a, e.node_b), max(e.node_a, e.node_b))
        if pair in seen_pairs:
            out.append(
                Violation(
                    "DuplicateEdge",
                    (seen_pairs[pair], e.id),
                    f"edges {seen_pairs[pair]} and {e.id} join the same nodes",
                )
            )
            continue
        seen_pairs[pair] = e.id
        degree[e.node_a] += 1
        degree[e.node_b] += 1
        valid_edges.append(e)

    for nid, deg in degree.items():
        if deg < 1 or deg > 3:
            out.append(
                Violation("NodeDegree", (nid,), f"node {nid} has degree {deg}, expected 1..3")
            )

    if len(hmap.outline) >= 3:
        for n in hmap.nodes:
            if not point_in_polygon(n.pos, hmap.outline, include_boundary=True):
                out.append(
                    Violation("NodeOutsideOutline", (n.id,), f"node {n.id} lies outside the outline")
                )
    else:
        out.append(Violation("BadOutline", (), "outline needs at least 3 corners"))

    # Pairwise proper-crossing check, broad-phased with the grid index.
    # Touching at a shared node is legal; crossing or overlapping anywhere
    # else is not.
    segs = {
        e.id: Segment(seen_nodes[e.node_a].pos, seen_nodes[e.node_b].pos) for e in valid_edges
    }
    by_id = {e.id: e for e in valid_edges}
    index = SpatialIndex(
        hmap.nominal_cell_edge, ((eid, s.bbox()) for eid, s in segs.items())
    )
    reported: set[tuple[int, int]] = set()
    for eid, seg in segs.items():
        for other_id in index.query(seg):
            if other_id <= eid:
                continue
            key = (eid, other_id)
            if key in reported:
                continue
            e1, e2 = by_id[eid], by_id[other_id]
            shared = {e1.node_a, e1.node_b} & {e2.node_a, e2.node_b}
            try:
                pt = seg_seg_intersection(seg, segs[other_id])
            except CollinearOverlap:
                reported.add(key)
                out.append(
                    Violation("EdgeCrossing", key, f"edges {eid} and {other_id} overlap")
                )
                continue
            if pt is None:
                continue
            if any(pt.distance_to(seen_nodes[nid].pos) <= EPS_GEOM for nid in shared):
                continue
            # Endpoint contact away from a shared node is a T-junction, not
            # a proper crossing; only interior-interior contact is flagged.
            d1 = min(pt.distance_to(seg.a), pt.distance_to(seg.b))
            d2 = min(pt.distance_to(segs[other_id].a), pt.distance_to(segs[other_id].b))
            if d1 > EPS_GEOM and d2 > EPS_GEOM:
                reported.add(key)
                out.append(
                    Violation(
                        "EdgeCrossing", key, f"edges {eid} and {other_id} cross at ({pt.x:.4f}, {pt.y:.4f})"
                    )
                )
    return out


def save_map(hmap: HoneycombMap) -> str:
    """Serialize a map to the versioned JSON schema, round-trip exact."""
    doc = {
        "format": MAP_FORMAT,
        "version": MAP_VERSION,
        "units": "mm",
        "nominal_cell_edge": hmap.nominal_cell_edge,
        "ribbon_axis_deg": hmap.ribbon_axis,
        "nodes": [{"id": n.id, "x": n.pos.x, "y": n.pos.y} for n in hmap.nodes],
        "edges": [
            {"id": e.id, "a": e.node_a, "b": e.node_b, "kind": e.kind.value}
            for e in hmap.edges
        ],
        "outline": [{"x": p.x, "y": p.y} for p in hmap.outline],
    }
    return json.dumps(doc, indent=1) + "\n"


_MAP_TOP_FIELDS = {
    "format",
    "version",
    "units",
    "nominal_cell_edge",
    "ribbon_axis_deg",
    "nodes",
    "edges",
    "outline",
}


def _require_number(obj, field: str, where: str) -> float:
    v = obj.get(field)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ParseError(0, f"{where}: field '{field}' must be a number")
    return float(v)


def _require_int(obj, field: str, where: str) -> int:
    v = obj.get(field)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ParseError(0, f"{where}: field '{field}' must be an integer")
    return v


def load_map(text: str) -> HoneycombMap:
    """Parse a map document produced by save_map."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.msg) from e
    if not isinstance(doc, dict):
        raise ParseError(0, "top level must be an object")
    unknown = set(doc) - _MAP_TOP_FIELDS
    if unknown:
        raise ParseError(0, f"unknown top-level fields: {sorted(unknown)}")
    missing = _MAP_TOP_FIELDS - set(doc)
    if missing:
        raise ParseError(0, f"missing top-level fields: {sorted(missing)}")
    if doc["format"] != MAP_FORMAT:
        raise ParseError(0, f"not a {MAP_FORMAT} document")
    if doc["version"] != MAP_VERSION:
        raise SchemaVersionUnsupported(f"unsupported map version {doc['version']!r}")
    if doc["units"] != "mm":
        raise ParseError(0, f"unsupported units {doc['units']!r}")

    nodes = []
    for i, n in enumerate(doc["nodes"]):
        if not isinstance(n, dict) or set(n) != {"id", "x", "y"}:
            raise ParseError(0, f"node #{i}: expected fields id, x, y")
        nodes.append(
            Node(_require_int(n, "id", f"node #{i}"), Point2(_require_number(n, "x", f"node #{i}"), _require_number(n, "y", f"node #{i}")))
        )
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, dict) or set(e) != {"id", "a", "b", "kind"}:
            raise ParseError(0, f"edge #{i}: expected fields id, a, b, kind")
        kind_raw = e["kind"]
        try:
            kind = EdgeKind(kind_raw)
        except ValueError:
            raise ParseError(0, f"edge #{i}: unknown edge kind {kind_raw!r}") from None
        edges.append(
            Edge(
                _require_int(e, "id", f"edge #{i}"),
                _require_int(e, "a", f"edge #{i}"),
                _require_int(e, "b", f"edge #{i}"),
                kind,
            )
        )
    outline = []
    for i, p in enumerate(doc["outline"]):
        if not isinstance(p, dict) or set(p) != {"x", "y"}:
            raise ParseError(0, f"outline point #{i}: expected fields x, y")
        outline.append(Point2(_require_number(p, "x", f"outline #{i}"), _require_number(p, "y", f"outline #{i}")))

    return HoneycombMap(
        nominal_cell_edge=_require_number(doc, "nominal_cell_edge", "header"),
        ribbon_axis=_require_number(doc, "ribbon_axis_deg", "header"),
        nodes=tuple(nodes),
        edges=tuple(edges),
        outline=tuple(outline),
    )


def crossings_for_chain(hmap: HoneycombMap, pts: np.ndarray, closed: bool) -> list[Crossing]:
    """Crossings of a connected point chain with the map walls.

    The chain is the sequence pts[0] -> pts[1] -> ..., closed back to
    pts[0] when `closed`. Results are ordered by traversal; a crossing
    repeated at a shared chain vertex (including the closing wrap) is
    reported once. Broad-phased with the wall index; candidates are
    confirmed with the exact segment predicate.
    """
    arr = hmap.edge_xyxy
    row_of = hmap.edge_row_by_id
    index = hmap.edge_index
    n = len(pts)
    if n < 2:
        return []
    last = n if closed else n - 1

    found: list[Crossing] = []

    def is_duplicate(edge_id: int, pt: Point2) -> bool:
        for c in found:
            if c.edge_id == edge_id and c.point.distance_to(pt) <= EPS_GEOM:
                return True
        return False

    for si in range(last):
        ax, ay = float(pts[si][0]), float(pts[si][1])
        bx, by = float(pts[(si + 1) % n][0]), float(pts[(si + 1) % n][1])
        if math.hypot(bx - ax, by - ay) <= EPS_GEOM:
            continue
        seg = Segment(Point2(ax, ay), Point2(bx, by))
        seg_len = seg.length
        hits: list[tuple[float, int, Point2, float]] = []
        for eid in index.query(seg):
            r = row_of[eid]
            ex0, ey0, ex1, ey1 = arr[r]
            edge_seg = Segment(Point2(ex0, ey0), Point2(ex1, ey1))
            try:
                pt = seg_seg_intersection(seg, edge_seg)
            except CollinearOverlap:
                raise ContourOnEdge(eid, si) from None
            if pt is None:
                continue
            t_seg = ((pt.x - ax) * (bx - ax) + (pt.y - ay) * (by - ay)) / (seg_len * seg_len)
            t_edge = ((pt.x - ex0) * (ex1 - ex0) + (pt.y - ey0) * (ey1 - ey0)) / (
                edge_seg.length * edge_seg.length
            )
            t_edge = min(1.0, max(0.0, t_edge))
            hits.append((t_seg, eid, pt, t_edge))
        hits.sort(key=lambda h: (h[0], h[1]))
        for _, eid, pt, t_edge in hits:
            if not is_duplicate(eid, pt):
                found.append(Crossing(eid, pt, t_edge))
    return found


def edges_crossing(hmap: HoneycombMap, polyline: Sequence[Segment]) -> list[Crossing]:
    """Every proper (wall, segment) intersection, in traversal order.

    Raises ContourOnEdge when a polyline segment lies collinear along a
    wall within EPS_GEOM.
    """
    out: list[Crossing] = []
    for si, seg in enumerate(polyline):
        chain = np.array([[seg.a.x, seg.a.y], [seg.b.x, seg.b.y]])
        try:
            hits = crossings_for_chain(hmap, chain, closed=False)
        except ContourOnEdge as e:
            raise ContourOnEdge(e.edge_id, si) from None
        for c in hits:
            if any(
                prev.edge_id == c.edge_id and prev.point.distance_to(c.point) <= EPS_GEOM
                for prev in out
            ):
                continue
            out.append(c)
    return out


def nearest_node(hmap: HoneycombMap, p: Point2) -> tuple[int, float]:
    """Node id minimizing Euclidean distance to p; ties go to the smaller id."""
    if not hmap.nodes:
        raise EmptyMap("map has no nodes")
    xy = hmap.node_xy
    d2 = (xy[:, 0] - p.x) ** 2 + (xy[:, 1] - p.y) ** 2
    row = int(np.argmin(d2))  # first minimum = smallest id (rows are id-sorted)
    nid = int(hmap.sorted_node_ids[row])
    return nid, float(math.sqrt(d2[row]))
