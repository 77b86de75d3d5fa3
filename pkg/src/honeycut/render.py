"""Deterministic SVG rendering of maps, shapes and cut plans.

One SVG user unit is one millimetre; the y axis is flipped so the origin
sits at the machine table's lower-left like the block itself. Single
walls draw thin black, double (glue) walls thick blue, the target contour
red, planned cuts as blade footprint rectangles, nodes as dots.
"""

from __future__ import annotations

from typing import Optional

from .geom import OrientedRect
from .honeycomb import EdgeKind, HoneycombMap
from .planner import CutPlan, KnifeSpec
from .shape import Shape, apply_placement, flatten


def _f(v: float) -> str:
    return f"{v:.4f}"


def render_svg(
    hmap: HoneycombMap,
    shape: Optional[Shape] = None,
    cutplan: Optional[CutPlan] = None,
    knife: KnifeSpec = KnifeSpec(),
) -> str:
    """Render the map (plus optionally a shape and its plan) as SVG text.

    When a plan is given the shape is drawn at the plan's placement,
    otherwise at its own coordinates.
    """
    x0, y0, x1, y1 = hmap.outline_bbox()
    pad = hmap.nominal_cell_edge
    width = (x1 - x0) + 2 * pad
    height = (y1 - y0) + 2 * pad

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}mm" '
        f'height="{_f(height)}mm" viewBox="0 0 {_f(width)} {_f(height)}">'
    )
    # Flip to a y-up frame with the outline's lower-left at (pad, pad).
    parts.append(
        f'<g transform="translate({_f(pad - x0)},{_f(height - pad + y0)}) scale(1,-1)">'
    )

    outline_pts = " ".join(f"{_f(p.x)},{_f(p.y)}" for p in hmap.outline)
    parts.append(
        f'<polygon class="outline" points="{outline_pts}" fill="none" '
        f'stroke="#555555" stroke-width="0.3"/>'
    )

    for e in hmap.edges:
        seg = hmap.edge_segment(e.id)
        if e.kind is EdgeKind.DOUBLE:
            style = 'class="edge-double" stroke="#1464c8" stroke-width="0.6"'
        else:
            style = 'class="edge-single" stroke="#000000" stroke-width="0.15"'
        parts.append(
            f'<line x1="{_f(seg.a.x)}" y1="{_f(seg.a.y)}" '
            f'x2="{_f(seg.b.x)}" y2="{_f(seg.b.y)}" {style}/>'
        )

    for n in hmap.nodes:
        parts.append(
            f'<circle class="node" cx="{_f(n.pos.x)}" cy="{_f(n.pos.y)}" r="0.35" '
            f'fill="#333333"/>'
        )

    if shape is not None:
        drawn = apply_placement(shape, cutplan.placement) if cutplan is not None else shape
        for segs in flatten(drawn, 0.01):
            pts = [segs[0].a] + [s.b for s in segs]
            path = " ".join(f"{_f(p.x)},{_f(p.y)}" for p in pts)
            parts.append(
                f'<polygon class="contour" points="{path}" fill="none" '
                f'stroke="#cc0000" stroke-width="0.3"/>'
            )

    if cutplan is not None:
        for cp in cutplan.points:
            rect = OrientedRect(
                cp.position, knife.width / 2.0, knife.thickness / 2.0, cp.knife_angle
            )
            pts = " ".join(f"{_f(c.x)},{_f(c.y)}" for c in rect.corners())
            parts.append(
                f'<polygon class="cut" points="{pts}" fill="#ff8800" '
                f'fill-opacity="0.9" stroke="none"/>'
            )

    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
