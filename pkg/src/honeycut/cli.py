"""Batch command-line pipeline: map generation and validation, planning,
G-code emission, simulation with verification, SVG rendering, reports.

Exit codes are a stable contract:
    0 success, 1 I/O failure, 2 usage or input-format error,
    3 planning failed, 4 shape too large, 5 verification failed.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import gcode as gcode_mod
from . import honeycomb, planner, render, shape as shape_mod
from .errors import ParseError

EXIT_IO = 1
EXIT_USAGE = 2
EXIT_PLANNING = 3
EXIT_TOO_LARGE = 4
EXIT_VERIFY = 5

_CONFIG_SECTIONS = {
    "knife": planner.KnifeSpec,
    "constraints": planner.Constraints,
    "machine": gcode_mod.MachineConfig,
    "generator": honeycomb.GeneratorParams,
}


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _coerce(raw: str, target_type) -> object:
    if target_type is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return target_type(raw)


def load_config(path: str | None) -> dict[str, dict]:
    """Parse `section.key=value` override lines; unknown keys are fatal."""
    overrides: dict[str, dict] = {name: {} for name in _CONFIG_SECTIONS}
    if path is None:
        return overrides
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        _fail(EXIT_IO, f"cannot read config {path}: {e}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            _fail(EXIT_USAGE, f"{path}:{lineno}: expected key=value")
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if "." not in key:
            _fail(EXIT_USAGE, f"{path}:{lineno}: key must be section.name, got {key!r}")
        section, _, name = key.partition(".")
        cls = _CONFIG_SECTIONS.get(section)
        if cls is None:
            _fail(EXIT_USAGE, f"{path}:{lineno}: unknown section {section!r}")
        fields = {f.name: f for f in dataclasses.fields(cls)}
        if name not in fields:
            _fail(EXIT_USAGE, f"{path}:{lineno}: unknown key {key!r}")
        ftype = {"float": float, "int": int, "bool": bool}.get(fields[name].type, float)
        try:
            overrides[section][name] = _coerce(value, ftype)
        except ValueError as e:
            _fail(EXIT_USAGE, f"{path}:{lineno}: {e}")
    return overrides


def _build(cls, overrides: dict, **flag_values):
    merged = dict(overrides)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        return cls(**merged)
    except (ValueError, TypeError) as e:
        _fail(EXIT_USAGE, str(e))


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        _fail(EXIT_IO, f"cannot read {path}: {e}")


def _write_text(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        _fail(EXIT_IO, f"cannot write {path}: {e}")


def _load_map(path: str) -> honeycomb.HoneycombMap:
    try:
        return honeycomb.load_map(_read_text(path))
    except (ParseError, honeycomb.SchemaVersionUnsupported) as e:
        _fail(EXIT_USAGE, f"{path}: {e}")


def _load_shape(path: str) -> shape_mod.Shape:
    try:
        return shape_mod.parse_path(_read_text(path))
    except (
        ParseError,
        shape_mod.OpenContour,
        shape_mod.SelfIntersecting,
        shape_mod.HoleOutsideOuter,
    ) as e:
        _fail(EXIT_USAGE, f"{path}: {e}")


def _load_plan(path: str) -> planner.CutPlan:
    try:
        return planner.load_plan(_read_text(path))
    except ParseError as e:
        _fail(EXIT_USAGE, f"{path}: {e}")


@click.group()
def cli():
    """Plan and verify knife cutting of shapes from honeycomb core blocks."""


@cli.command("gen-grid")
@click.option("--cols", type=int, required=True, help="Cells along the ribbon axis.")
@click.option("--rows", type=int, required=True, help="Cells across the ribbon axis.")
@click.option("--cell-edge", type=float, default=None, help="Nominal wall length, mm.")
@click.option("--jitter", type=float, default=None, help="Node jitter sigma, mm.")
@click.option("--seed", type=int, default=None, help="Jitter RNG seed.")
@click.option("--ribbon-axis", type=float, default=None, help="Glue-line direction, degrees.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("-o", "--out", required=True, help="Output map file.")
def cmd_gen_grid(cols, rows, cell_edge, jitter, seed, ribbon_axis, config_path, out):
    """Generate a synthetic jittered honeycomb map."""
    overrides = load_config(config_path)["generator"]
    try:
        params = honeycomb.GeneratorParams(
            columns=cols,
            rows=rows,
            cell_edge=cell_edge if cell_edge is not None else overrides.get("cell_edge", 10.0),
            jitter_sigma=jitter if jitter is not None else overrides.get("jitter_sigma", 0.1),
            seed=seed if seed is not None else overrides.get("seed", 0),
            ribbon_axis=ribbon_axis
            if ribbon_axis is not None
            else overrides.get("ribbon_axis", 0.0),
        )
    except honeycomb.InvalidParams as e:
        _fail(EXIT_USAGE, f"--cols/--rows/--cell-edge/--jitter: {e}")
    hmap = honeycomb.generate(params)
    _write_text(out, honeycomb.save_map(hmap))
    click.echo(f"{out}: {len(hmap.nodes)} nodes, {len(hmap.edges)} edges")


@cli.command("validate-map")
@click.argument("map_path")
def cmd_validate_map(map_path):
    """Check a map file against every structural invariant."""
    hmap = _load_map(map_path)
    violations = honeycomb.validate(hmap)
    for v in violations:
        click.echo(f"{v.kind}{list(v.ids)}: {v.message}")
    if violations:
        sys.exit(EXIT_VERIFY)
    click.echo(f"{map_path}: ok ({len(hmap.nodes)} nodes, {len(hmap.edges)} edges)")


@cli.command("plan")
@click.option("--map", "map_path", required=True, help="Map file.")
@click.option("--shape", "shape_path", required=True, help="Pattern file.")
@click.option("--allow-double", is_flag=True, default=False, help="Permit cuts on glue walls.")
@click.option("--use-block-edge", is_flag=True, default=False, help="Reuse the block edge as one side.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("-o", "--out", required=True, help="Output plan file.")
def cmd_plan(map_path, shape_path, allow_double, use_block_edge, config_path, out):
    """Search for a placement with a feasible cut point at every crossing."""
    cfg = load_config(config_path)
    hmap = _load_map(map_path)
    target = _load_shape(shape_path)
    knife = _build(planner.KnifeSpec, cfg["knife"])
    constraint_over = dict(cfg["constraints"])
    if allow_double:
        constraint_over["allow_double"] = True
    constraints = _build(planner.Constraints, constraint_over)
    options = planner.PlanOptions(use_block_edge=use_block_edge)
    try:
        result = planner.plan(target, hmap, knife, constraints, options)
    except planner.ShapeTooLarge as e:
        _fail(EXIT_TOO_LARGE, str(e))
    except planner.PlanningFailed as e:
        click.echo(f"planning failed: {e}", err=True)
        for p in e.problems:
            click.echo(
                f"  {p.reason.value} at edge {p.crossing.edge_id} "
                f"({p.crossing.point.x:.2f}, {p.crossing.point.y:.2f})",
                err=True,
            )
        sys.exit(EXIT_PLANNING)
    _write_text(out, planner.save_plan(result))
    click.echo(json.dumps(planner.report_to_dict(result.metrics), indent=1))


@cli.command("gcode")
@click.option("--plan", "plan_path", required=True, help="Plan file.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("-o", "--out", required=True, help="Output G-code file.")
def cmd_gcode(plan_path, config_path, out):
    """Convert a plan to machine G-code."""
    cfg = load_config(config_path)
    cutplan = _load_plan(plan_path)
    machine = _build(gcode_mod.MachineConfig, cfg["machine"])
    try:
        text = gcode_mod.emit(cutplan, machine)
    except gcode_mod.QuantizationCollision as e:
        _fail(EXIT_VERIFY, str(e))
    _write_text(out, text)
    click.echo(f"{out}: {len(cutplan.points)} cuts")


@cli.command("simulate")
@click.option("--gcode", "gcode_path", required=True, help="G-code file.")
@click.option("--map", "map_path", required=True, help="Map file.")
@click.option("--shape", "shape_path", required=True, help="Pattern file.")
@click.option("--plan", "plan_path", required=True, help="Plan file (for the placement).")
@click.option("--config", "config_path", type=str, default=None)
def cmd_simulate(gcode_path, map_path, shape_path, plan_path, config_path):
    """Parse, simulate and verify a G-code program against the map."""
    cfg = load_config(config_path)
    hmap = _load_map(map_path)
    target = _load_shape(shape_path)
    cutplan = _load_plan(plan_path)
    knife = _build(planner.KnifeSpec, cfg["knife"])
    constraints = _build(planner.Constraints, cfg["constraints"])
    machine = _build(gcode_mod.MachineConfig, cfg["machine"])
    try:
        program = gcode_mod.parse(_read_text(gcode_path))
    except ParseError as e:
        _fail(EXIT_USAGE, f"{gcode_path}: {e}")
    placed = shape_mod.apply_placement(target, cutplan.placement)
    try:
        result = gcode_mod.verify_program(program, hmap, placed, knife, constraints, machine)
    except (gcode_mod.SimulationError, gcode_mod.CutOffEdge) as e:
        _fail(EXIT_VERIFY, str(e))
    if isinstance(result, list):
        for v in result:
            where = "" if v.point_index is None else f" (cut #{v.point_index})"
            click.echo(f"{v.kind}{where}: {v.message}")
        sys.exit(EXIT_VERIFY)
    click.echo(json.dumps(planner.report_to_dict(result), indent=1))


@cli.command("render")
@click.option("--map", "map_path", required=True, help="Map file.")
@click.option("--shape", "shape_path", default=None, help="Pattern file.")
@click.option("--plan", "plan_path", default=None, help="Plan file.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("-o", "--out", required=True, help="Output SVG file.")
def cmd_render(map_path, shape_path, plan_path, config_path, out):
    """Draw the map, and optionally the placed shape and cuts, as SVG."""
    cfg = load_config(config_path)
    hmap = _load_map(map_path)
    target = _load_shape(shape_path) if shape_path else None
    cutplan = _load_plan(plan_path) if plan_path else None
    if cutplan is not None and target is None:
        _fail(EXIT_USAGE, "--plan requires --shape")
    knife = _build(planner.KnifeSpec, cfg["knife"])
    _write_text(out, render.render_svg(hmap, target, cutplan, knife))
    click.echo(f"{out}: written")


@cli.command("report")
@click.option("--plan", "plan_path", required=True, help="Plan file.")
def cmd_report(plan_path):
    """Print a plan's metrics."""
    cutplan = _load_plan(plan_path)
    click.echo(json.dumps(planner.report_to_dict(cutplan.metrics), indent=1))


def main():
    cli(standalone_mode=True)


if __name__ == "__main__":
    main()
