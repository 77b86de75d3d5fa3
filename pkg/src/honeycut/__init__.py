"""honeycut: plan knife cut points on irregular honeycomb core blocks and
emit verified 4-axis G-code.

The pipeline: generate or load a honeycomb map (the measured wall graph of
a real block), parse the target shape, search for a placement where every
contour/wall crossing admits a feasible plunge point, then convert the
plan to G-code and verify the program by simulation.
"""

from .errors import ParseError
from .geom import (
    EPS_GEOM,
    CollinearOverlap,
    GeometryError,
    OrientedRect,
    Point2,
    Segment,
    SpatialIndex,
    Transform2,
    point_segment_distance,
    rect_intersects_segment,
    seg_seg_intersection,
)
from .honeycomb import (
    ContourOnEdge,
    Crossing,
    Edge,
    EdgeKind,
    EmptyMap,
    GeneratorParams,
    HoneycombMap,
    InvalidParams,
    Node,
    SchemaVersionUnsupported,
    Violation,
    edges_crossing,
    generate,
    load_map,
    nearest_node,
    save_map,
    validate,
)
from .shape import (
    ArcTo,
    Close,
    Contour,
    HoleOutsideOuter,
    LineTo,
    MoveTo,
    OpenContour,
    Placement,
    SelfIntersecting,
    Shape,
    apply_placement,
    flatten,
    longest_straight_segment,
    min_curvature_radius,
    parse_path,
    serialize,
)
from .planner import (
    Constraints,
    CutPlan,
    CutPoint,
    KnifeSpec,
    PlanOptions,
    PlanViolation,
    PlanningFailed,
    ProblemPoint,
    ProblemReason,
    Report,
    ShapeTooLarge,
    feasible_knife_angle,
    fit_check,
    initial_placement,
    load_plan,
    plan,
    save_plan,
    select_cut_point,
    verify_plan,
)
from .gcode import (
    CutOffEdge,
    GProgram,
    Linear,
    MachineConfig,
    PlungeWithoutAngle,
    ProgramEnd,
    QuantizationCollision,
    Rapid,
    SetAbsolute,
    SetUnitsMM,
    SimulatedCut,
    UnsupportedCode,
    ZBelowBacking,
    emit,
    parse,
    simulate,
    verify_program,
)
from .render import render_svg

__version__ = "0.1.0"
