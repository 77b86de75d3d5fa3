"""Strict 4-axis (X, Y, Z, A) G-code: emitter, parser, simulator, and an
end-to-end verifier that replays a program against the map constraints.

The dialect is deliberately tiny so the emitter and parser are exact
inverses: G21 (mm), G90 (absolute), G0 (rapid), G1 (linear with feed),
M2 (end). One command per line, uppercase words, LF endings, ';' comments
accepted on input and never emitted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Union

import numpy as np

from .errors import ParseError
from .geom import Point2, normalize_deg
from .honeycomb import EdgeKind, HoneycombMap, nearest_node
from .planner import (
    Constraints,
    CutPlan,
    CutPoint,
    KnifeSpec,
    PlanViolation,
    Report,
    _contour_point_arrays,
    _fold_deviation,
    _verify_points,
)
from .shape import Shape

#: A simulated cut farther than this from every wall cannot be attributed
#: to any wall at all (well beyond quantization error).
SNAP_TOL = 0.02


class UnsupportedCode(ParseError):
    """A recognizable G/M code outside the dialect (arcs, tool changes...)."""


class QuantizationCollision(ValueError):
    """Two distinct cut points on one wall quantize to the same (x, y)."""


class SimulationError(ValueError):
    """Program replay hit an illegal machine state."""


class ZBelowBacking(SimulationError):
    """A move commands Z below the sacrificial backing layer."""


class PlungeWithoutAngle(SimulationError):
    """A plunge happens before any A word set the blade direction."""


class CutOffEdge(ValueError):
    """A simulated cut lies farther than SNAP_TOL from every wall."""


@dataclass(frozen=True)
class MachineConfig:
    safe_z: float = 5.0
    block_height: float = 40.0
    backing_penetration: float = 0.5
    plunge_feed: float = 3000.0
    travel_feed: float = 6000.0
    position_quantum: float = 0.01
    angle_quantum: float = 0.1

    def __post_init__(self):
        for name in (
            "safe_z",
            "block_height",
            "backing_penetration",
            "plunge_feed",
            "travel_feed",
            "position_quantum",
            "angle_quantum",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.position_quantum > 0.1:
            raise ValueError("position_quantum must not exceed the 0.1 mm accuracy budget")

    @property
    def plunge_z(self) -> float:
        return -(self.block_height + self.backing_penetration)


@dataclass(frozen=True)
class Rapid:
    x: Optional[float] = None
    y: Optional[float] = None
    z: Optional[float] = None
    a: Optional[float] = None


@dataclass(frozen=True)
class Linear:
    feed: float
    x: Optional[float] = None
    y: Optional[float] = None
    z: Optional[float] = None
    a: Optional[float] = None


@dataclass(frozen=True)
class SetUnitsMM:
    pass


@dataclass(frozen=True)
class SetAbsolute:
    pass


@dataclass(frozen=True)
class ProgramEnd:
    pass


GCommand = Union[Rapid, Linear, SetUnitsMM, SetAbsolute, ProgramEnd]


@dataclass(frozen=True)
class GProgram:
    commands: tuple[GCommand, ...]
    source_line_map: tuple[int, ...]


@dataclass(frozen=True)
class SimulatedCut:
    x: float
    y: float
    angle: float
    depth: float


def _decimals_of(quantum: float) -> int:
    exp = Decimal(str(quantum)).normalize().as_tuple().exponent
    return max(0, -int(exp))


def quantize(value: float, quantum: float) -> Decimal:
    """Round to the nearest multiple of quantum, halves away from zero."""
    q = Decimal(str(quantum))
    steps = (Decimal(repr(float(value))) / q).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return (steps * q).quantize(q)


def _fmt_quantized(value: float, quantum: float) -> str:
    d = quantize(value, quantum)
    if d == 0:
        d = abs(d)  # never emit -0.00
    return f"{d:.{_decimals_of(quantum)}f}"


def emit(cutplan: CutPlan, cfg: MachineConfig = MachineConfig()) -> str:
    """Render a plan as G-code text.

    Per cut point: rapid to (x, y), rotate the blade, plunge through the
    block into the backing at the cutting feed, retract to safe height.
    The machine starts at safe height, so no leading retract is emitted.
    X/Y/Z quantize to position_quantum, A to angle_quantum.
    """
    lines = ["G21", "G90"]
    seen: dict[int, set[tuple[str, str]]] = {}
    z_plunge = _fmt_quantized(cfg.plunge_z, cfg.position_quantum)
    z_safe = _fmt_quantized(cfg.safe_z, cfg.position_quantum)
    feed = f"{cfg.plunge_feed:.0f}"
    for cp in cutplan.points:
        xw = _fmt_quantized(cp.position.x, cfg.position_quantum)
        yw = _fmt_quantized(cp.position.y, cfg.position_quantum)
        aw = _fmt_quantized(normalize_deg(cp.knife_angle), cfg.angle_quantum)
        prior = seen.setdefault(cp.edge_id, set())
        if (xw, yw) in prior:
            raise QuantizationCollision(
                f"two cuts on edge {cp.edge_id} both quantize to X{xw} Y{yw}"
            )
        prior.add((xw, yw))
        lines.append(f"G0 X{xw} Y{yw}")
        lines.append(f"G0 A{aw}")
        lines.append(f"G1 Z{z_plunge} F{feed}")
        lines.append(f"G0 Z{z_safe}")
    lines.append("M2")
    return "\n".join(lines) + "\n"


_WORD_RE = re.compile(r"^([A-Z])(-?(?:\d+\.?\d*|\.\d+))$")
_KNOWN_CODES = {
    "G0": "rapid",
    "G1": "linear",
    "G21": "units",
    "G90": "absolute",
    "M2": "end",
}
# Codes we can name but refuse: arcs, dwell, planes, inches, offsets,
# incremental mode, spindle and stop codes.
_UNSUPPORTED = {
    "G2",
    "G3",
    "G4",
    "G17",
    "G18",
    "G19",
    "G20",
    "G28",
    "G91",
    "G92",
    "G93",
    "G94",
    "M0",
    "M1",
    "M3",
    "M4",
    "M5",
    "M6",
    "M30",
}


def parse(text: str) -> GProgram:
    """Parse G-code text in the emitted dialect into a token-faithful program."""
    commands: list[GCommand] = []
    line_map: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split(";", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        head = tokens[0]
        if head != head.upper():
            raise ParseError(lineno, f"lowercase word {head!r}")
        if head in _UNSUPPORTED:
            raise UnsupportedCode(lineno, f"unsupported code {head}")
        if head not in _KNOWN_CODES:
            raise ParseError(lineno, f"unknown word {head!r}")
        kind = _KNOWN_CODES[head]

        if kind in ("units", "absolute", "end"):
            if len(tokens) > 1:
                raise ParseError(lineno, f"{head} takes no arguments")
            commands.append(
                {"units": SetUnitsMM(), "absolute": SetAbsolute(), "end": ProgramEnd()}[kind]
            )
            line_map.append(lineno)
            continue

        words: dict[str, float] = {}
        for tok in tokens[1:]:
            m = _WORD_RE.match(tok)
            if not m:
                raise ParseError(lineno, f"bad word {tok!r}")
            letter, number = m.group(1), float(m.group(2))
            if letter not in ("X", "Y", "Z", "A", "F"):
                raise ParseError(lineno, f"unknown axis word {tok!r}")
            if letter in words:
                raise ParseError(lineno, f"duplicate word {letter}")
            words[letter] = number

        axes = {k: v for k, v in words.items() if k in ("X", "Y", "Z", "A")}
        if not axes:
            raise ParseError(lineno, f"{head} without any axis word")
        if kind == "rapid":
            if "F" in words:
                raise ParseError(lineno, "feed word on a rapid move")
            commands.append(Rapid(axes.get("X"), axes.get("Y"), axes.get("Z"), axes.get("A")))
        else:
            if "F" not in words:
                raise ParseError(lineno, "linear move without a feed word")
            if not words["F"] > 0.0:
                raise ParseError(lineno, "feed must be positive")
            commands.append(
                Linear(words["F"], axes.get("X"), axes.get("Y"), axes.get("Z"), axes.get("A"))
            )
        line_map.append(lineno)

    if len(commands) < 3:
        raise ParseError(0, "program too short: expected G21, G90 ... M2")
    if not isinstance(commands[0], SetUnitsMM):
        raise ParseError(line_map[0], "program must start with G21")
    if not isinstance(commands[1], SetAbsolute):
        raise ParseError(line_map[1], "G90 must follow G21")
    if not isinstance(commands[-1], ProgramEnd):
        raise ParseError(line_map[-1], "program must end with M2")
    for cmd, ln in zip(commands[2:-1], line_map[2:-1]):
        if isinstance(cmd, (SetUnitsMM, SetAbsolute, ProgramEnd)):
            raise ParseError(ln, "mode/end command in the program body")
    return GProgram(tuple(commands), tuple(line_map))


def simulate(program: GProgram, cfg: MachineConfig = MachineConfig()) -> list[SimulatedCut]:
    """Replay absolute machine state; every linear move that bottoms out at
    the backing records one cut. Z bounds are enforced on every move."""
    x = y = a = None
    z = cfg.safe_z
    plunge_z = cfg.plunge_z
    tol = cfg.position_quantum / 2.0
    cuts: list[SimulatedCut] = []
    for cmd, ln in zip(program.commands, program.source_line_map):
        if not isinstance(cmd, (Rapid, Linear)):
            continue
        if cmd.x is not None:
            x = cmd.x
        if cmd.y is not None:
            y = cmd.y
        if cmd.a is not None:
            a = cmd.a
        if cmd.z is not None:
            if cmd.z < plunge_z - tol:
                raise ZBelowBacking(
                    f"line {ln}: Z{cmd.z} is below the backing limit {plunge_z}"
                )
            z = cmd.z
            if isinstance(cmd, Linear) and z <= plunge_z + tol:
                if a is None:
                    raise PlungeWithoutAngle(f"line {ln}: plunge before any A word")
                if x is None or y is None:
                    raise SimulationError(f"line {ln}: plunge before X/Y position set")
                cuts.append(SimulatedCut(x, y, a, -z))
    return cuts


def _contour_distance(placed_contours: list[np.ndarray], p: Point2) -> float:
    best = math.inf
    for pts in placed_contours:
        closed = np.vstack([pts, pts[:1]])
        ax, ay = closed[:-1, 0], closed[:-1, 1]
        bx, by = closed[1:, 0], closed[1:, 1]
        dx, dy = bx - ax, by - ay
        ln2 = np.maximum(dx * dx + dy * dy, 1e-300)
        t = np.clip(((p.x - ax) * dx + (p.y - ay) * dy) / ln2, 0.0, 1.0)
        nx, ny = ax + t * dx, ay + t * dy
        best = min(best, float(np.sqrt(((p.x - nx) ** 2 + (p.y - ny) ** 2).min())))
    return best


def verify_program(
    program: GProgram,
    hmap: HoneycombMap,
    placed_shape: Shape,
    knife: KnifeSpec = KnifeSpec(),
    constraints: Constraints = Constraints(),
    cfg: MachineConfig = MachineConfig(),
) -> Union[Report, list[PlanViolation]]:
    """Simulate the program and re-check every cut against the map.

    `placed_shape` must already be in machine coordinates (the plan's
    placement applied). Each simulated cut snaps to its nearest wall
    (raising CutOffEdge beyond SNAP_TOL) and then passes through the same
    constraint checks as plan verification, with slack for the coordinate
    and angle quantization.
    """
    if abs(cfg.angle_quantum - knife.angle_resolution) > 1e-12:
        raise ValueError(
            f"machine angle quantum {cfg.angle_quantum} must equal the knife "
            f"angle resolution {knife.angle_resolution}"
        )
    cuts = simulate(program, cfg)
    arr = hmap.edge_xyxy
    placed_contours = _contour_point_arrays(placed_shape, 0.01)

    points: list[CutPoint] = []
    for ci, cut in enumerate(cuts):
        ax, ay = arr[:, 0], arr[:, 1]
        bx, by = arr[:, 2], arr[:, 3]
        dx, dy = bx - ax, by - ay
        ln2 = dx * dx + dy * dy
        t = np.clip(((cut.x - ax) * dx + (cut.y - ay) * dy) / ln2, 0.0, 1.0)
        nx, ny = ax + t * dx, ay + t * dy
        d2 = (cut.x - nx) ** 2 + (cut.y - ny) ** 2
        row = int(np.argmin(d2))
        dist = math.sqrt(float(d2[row]))
        if dist > SNAP_TOL:
            raise CutOffEdge(
                f"cut #{ci} at ({cut.x}, {cut.y}) is {dist:.4f} mm from every edge"
            )
        edge = hmap.edges[row]
        position = Point2(float(nx[row]), float(ny[row]))
        seg = hmap.edge_segment(edge.id)
        perp = normalize_deg(seg.direction_deg + 90.0)
        angle = normalize_deg(cut.angle)
        _, nd = nearest_node(hmap, position)
        points.append(
            CutPoint(
                edge_id=edge.id,
                position=position,
                t_on_edge=float(t[row]),
                knife_angle=angle,
                angle_deviation=_fold_deviation(angle, perp),
                indentation=_contour_distance(placed_contours, position),
                node_distance=nd,
            )
        )

    pos_slack = cfg.position_quantum * math.sqrt(2.0) / 2.0 + SNAP_TOL
    ang_slack = cfg.angle_quantum / 2.0
    violations = _verify_points(
        points,
        placed_contours,
        hmap,
        knife,
        constraints,
        pos_slack=pos_slack,
        ang_slack=ang_slack,
        membership_tol=SNAP_TOL,
        indentation_known=False,
    )
    if violations:
        return violations

    double = sum(1 for cp in points if hmap.edge_by_id[cp.edge_id].kind is EdgeKind.DOUBLE)
    return Report(
        cut_point_count=len(points),
        min_node_distance=min((cp.node_distance for cp in points), default=math.inf),
        max_indentation=max((cp.indentation for cp in points), default=0.0),
        double_edge_cuts=double,
        max_angle_deviation_used=max((cp.angle_deviation for cp in points), default=0.0),
        placements_tried=0,
    )
