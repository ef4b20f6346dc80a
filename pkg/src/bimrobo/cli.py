"""Command-line front end: one subcommand per pipeline stage, plus ``pipeline``.

Exit codes:
  0  success (requirements satisfied, all plans succeeded)
  1  input error (missing or malformed file, unknown id, no suitable robot)
  2  unsatisfied modeling requirements (build-world and simulate refuse without --force)
  3  at least one robot plan failed during simulation

Every output lands under the run directory given by ``--out``, next to a
``manifest.json`` listing each artifact with its sha256.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import yaml

from . import __version__
from ._io import InputError, data_path
from .analytics import MalformedTrace, emit_report, summary
from .fleet import RobotDescriptor, load_fleet, match_robots
from .kb import KnowledgeBase, SpecNotFound, load_kb, lookup_spec, required_capabilities
from .model import Project, load_project
from .reqs import (ModelingRequirement, RequirementError, SiteParamsError, derive_requirements,
                   format_requirements_table, validate_site_params)
from .sim import SimParams, compile_plan, load_agents, read_trace, run, write_trace
from .sim.compile import CompileError, check_carry_poses
from .sim.trace import TraceError
from .worldgen import (DEFAULT_MARGIN, DEFAULT_RESOLUTION, DEFAULT_Z_BAND, SimWorld, build_world,
                       emit_sdf, read_map_pgm, sha256_file, write_manifest, write_map_pgm)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSATISFIED = 2
EXIT_PLAN_FAILED = 3

WORLD_DIR = "world"
REPORT_DIR = "report"
TRACE_FILE = "trace.jsonl"
REQUIREMENTS_FILE = "requirements.json"
MANIFEST = "manifest.json"


class CliError(Exception):
    """An input problem reported as exit code 1."""


@dataclass(frozen=True)
class RunConfig:
    project: str | None
    out: str
    kb: tuple[str, ...] = ("default",)
    fleet: str | None = None
    agents: str | None = None
    resolution: float = DEFAULT_RESOLUTION
    z_band: tuple[float, float] = DEFAULT_Z_BAND
    margin: float = DEFAULT_MARGIN
    sim: SimParams = field(default_factory=SimParams)
    robot: str | None = None
    force: bool = False
    trace: str | None = None
    map: str | None = None

    def __post_init__(self) -> None:
        paths = [("project", self.project), ("fleet", self.fleet), ("agents", self.agents)]
        paths += [("kb", p) for p in self.kb if p != "default"]
        for name, p in paths:
            if p is not None and not os.path.isfile(p):
                raise CliError(f"{name} file not found: {p}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "project": self.project,
            "kb": list(self.kb),
            "fleet": self.fleet or "default",
            "agents": self.agents,
            "resolution": self.resolution,
            "z_band": list(self.z_band),
            "margin": self.margin,
            "sim": self.sim.to_dict(),
            "robot": self.robot,
        }


# -- configuration ------------------------------------------------------------------

def scenario_path(name_or_path: str) -> str:
    """A scenario file path, or the name of a bundled scenario directory."""
    if os.path.isdir(name_or_path):
        return os.path.join(name_or_path, "scenario.yaml")
    if os.path.isfile(name_or_path):
        return name_or_path
    bundled = data_path("scenarios", name_or_path, "scenario.yaml")
    if os.path.isfile(bundled):
        return bundled
    raise CliError(f"scenario not found: {name_or_path}")


def bundled_scenarios() -> list[str]:
    root = data_path("scenarios")
    return sorted(d for d in os.listdir(root) if os.path.isfile(os.path.join(root, d, "scenario.yaml")))


def _load_scenario(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise CliError(f"{path}: malformed scenario file: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError(f"{path}: scenario must be a mapping")
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return p if p in (None, "default") else os.path.normpath(os.path.join(base, p))

    out = dict(doc)
    for key in ("project", "fleet", "agents"):
        if key in out:
            out[key] = rel(out[key])
    if "kb" in out:
        kb = out["kb"] if isinstance(out["kb"], list) else [out["kb"]]
        out["kb"] = [rel(p) for p in kb]
    return out


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Scenario file values, overridden by explicit flags."""
    base: dict[str, Any] = _load_scenario(scenario_path(args.scenario)) if args.scenario else {}
    sim = dict(base.get("sim") or {})
    for flag, key in (("dt", "dt"), ("reorient_duration", "reorient_duration"),
                      ("sim_margin", "margin"), ("horizon", "horizon")):
        if getattr(args, flag, None) is not None:
            sim[key] = getattr(args, flag)
    if getattr(args, "abort_on_failure", False):
        sim["abort_on_failure"] = True
    try:
        params = SimParams(**sim)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid simulation parameters: {exc}") from None

    project = args.project or base.get("project")
    if project is None:
        raise CliError("no project given (use --project or --scenario)")
    fleet = args.fleet or base.get("fleet")
    z_band = args.z_band or base.get("z_band") or DEFAULT_Z_BAND
    return RunConfig(
        project=project,
        out=args.out,
        kb=tuple(args.kb or base.get("kb") or ["default"]),
        fleet=None if fleet in (None, "default") else fleet,
        agents=args.agents or base.get("agents"),
        resolution=float(args.resolution or base.get("resolution") or DEFAULT_RESOLUTION),
        z_band=(float(z_band[0]), float(z_band[1])),
        margin=float(args.margin if args.margin is not None else base.get("margin", DEFAULT_MARGIN)),
        sim=params,
        robot=getattr(args, "robot", None),
        force=bool(getattr(args, "force", False)),
        trace=getattr(args, "trace", None),
        map=getattr(args, "map", None),
    )


# -- run directory manifest ---------------------------------------------------------

def _manifest_path(out: str) -> str:
    return os.path.join(out, MANIFEST)


def _update_manifest(cfg: RunConfig, stage: str, status: int, **info: Any) -> None:
    """Merge one stage record into the run manifest and rehash every artifact."""
    os.makedirs(cfg.out, exist_ok=True)
    path = _manifest_path(cfg.out)
    doc: dict[str, Any] = {}
    if os.path.isfile(path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    doc["tool"] = {"name": "bimrobo", "version": __version__}
    doc["config"] = cfg.to_dict()
    doc.setdefault("stages", {})[stage] = {"exit": status, **info}
    doc["forced"] = any(s.get("forced", False) for s in doc["stages"].values())
    files = {}
    for root, _, names in os.walk(cfg.out):
        for n in names:
            p = os.path.join(root, n)
            rp = os.path.relpath(p, cfg.out).replace(os.sep, "/")
            if rp != MANIFEST:
                files[rp] = sha256_file(p)
    doc["files"] = dict(sorted(files.items()))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- loading ------------------------------------------------------------------------

@dataclass
class _Inputs:
    project: Project
    kb: KnowledgeBase


def _load_inputs(cfg: RunConfig) -> _Inputs:
    project = load_project(cfg.project)
    kb = load_kb(list(cfg.kb))
    site = validate_site_params(project.site_params, project)
    return _Inputs(replace(project, site_params=site), kb)


def _derive(inp: _Inputs) -> list[ModelingRequirement]:
    return derive_requirements(inp.project, inp.kb)


def _gate(cfg: RunConfig, inp: _Inputs, stage: str) -> tuple[int, dict[str, Any]]:
    """(exit status, manifest info) for stages behind the requirement gate."""
    missing = _derive(inp)
    if not missing:
        return EXIT_OK, {"forced": False}
    if not cfg.force:
        print(f"{stage}: {len(missing)} unsatisfied modeling requirement(s); "
              f"run 'derive' for details or pass --force", file=sys.stderr)
        return EXIT_UNSATISFIED, {}
    print(f"{stage}: proceeding past {len(missing)} unsatisfied requirement(s) (--force)",
          file=sys.stderr)
    return EXIT_OK, {"forced": True, "unsatisfied": [r.to_dict() for r in missing]}


def _world(cfg: RunConfig, inp: _Inputs):
    agents = load_agents(cfg.agents) if cfg.agents else []
    world = build_world(inp.project, z_band=cfg.z_band, resolution=cfg.resolution,
                        margin=cfg.margin, agents=agents)
    return world, agents


def _select_robot(cfg: RunConfig, inp: _Inputs) -> tuple[RobotDescriptor | None, list[str]]:
    spec_ids = sorted({t.task_spec_id for t in inp.project.tasks if t.robotization})
    if not spec_ids:
        return None, []
    caps = required_capabilities(inp.kb, spec_ids)
    fleet = load_fleet(cfg.fleet)
    matches = match_robots(fleet, caps, inp.project.site_params)
    if cfg.robot is not None:
        if cfg.robot not in {r.id for r in fleet}:
            raise CliError(f"robot {cfg.robot!r} is not in the fleet")
        matches = [r for r in matches if r.id == cfg.robot]
    if not matches:
        raise CliError(f"no robot in the fleet provides {sorted(caps)} within the jobsite limits")
    return matches[0], [r.id for r in matches]


def _plans(world: SimWorld, inp: _Inputs, robot: RobotDescriptor):
    plans = []
    tasks = sorted((t for t in inp.project.tasks if t.robotization), key=lambda t: (t.start_date, t.id))
    for task in tasks:
        spec = lookup_spec(inp.kb, task.task_spec_id)  # type: ignore[arg-type]
        for plan in compile_plan(task, spec, world, robot, inp.kb):
            check_carry_poses(plan, robot)
            plans.append(plan)
    return plans


# -- subcommands --------------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    inp = _load_inputs(cfg)
    for t in inp.project.tasks:
        if t.robotization:
            lookup_spec(inp.kb, t.task_spec_id)  # type: ignore[arg-type]
    fleet = load_fleet(cfg.fleet)
    agents = load_agents(cfg.agents) if cfg.agents else []
    print(f"ok: {len(inp.project.elements)} elements, {len(inp.project.tasks)} tasks, "
          f"{len(inp.kb.specs)} task specs, {len(fleet)} robots, {len(agents)} agents")
    return EXIT_OK


def cmd_derive(cfg: RunConfig) -> int:
    inp = _load_inputs(cfg)
    reqs = _derive(inp)
    print(format_requirements_table(reqs) if reqs else "all modeling requirements are satisfied")
    status = EXIT_UNSATISFIED if reqs else EXIT_OK
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, REQUIREMENTS_FILE), "w", encoding="utf-8") as fh:
        json.dump({"unsatisfied": len(reqs), "requirements": [r.to_dict() for r in reqs]},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    _update_manifest(cfg, "derive", status, unsatisfied=len(reqs))
    return status


def cmd_build_world(cfg: RunConfig) -> int:
    inp = _load_inputs(cfg)
    status, info = _gate(cfg, inp, "build-world")
    if status:
        return status
    world, _ = _world(cfg, inp)
    wdir = os.path.join(cfg.out, WORLD_DIR)
    files = emit_sdf(world, wdir)
    pgm, meta = write_map_pgm(world.grid, os.path.join(wdir, "map.pgm"))
    for p in (pgm, meta):
        files[os.path.basename(p)] = sha256_file(p)
    write_manifest(wdir, files, resolution=cfg.resolution, z_band=list(cfg.z_band),
                   margin=cfg.margin, scheduled=[e.id for e in world.partition.scheduled],
                   forced=info["forced"])
    print(f"world: {len(world.partition.scheduled)} scheduled element models, "
          f"map {world.grid.width}x{world.grid.height} at {cfg.resolution} m -> {wdir}")
    _update_manifest(cfg, "build-world", EXIT_OK, resolution=cfg.resolution,
                     z_band=list(cfg.z_band), **info)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    inp = _load_inputs(cfg)
    status, info = _gate(cfg, inp, "simulate")
    if status:
        return status
    world, agents = _world(cfg, inp)
    robot, candidates = _select_robot(cfg, inp)
    try:
        plans = _plans(world, inp, robot) if robot is not None else []
    except CompileError as exc:
        print(f"simulate: cannot compile robot plans: {exc}", file=sys.stderr)
        return EXIT_UNSATISFIED if info.get("forced") else EXIT_INPUT
    trace = run(world, plans, agents, cfg.sim, robot)
    os.makedirs(cfg.out, exist_ok=True)
    write_trace(trace, os.path.join(cfg.out, TRACE_FILE))
    emit_report(trace, os.path.join(cfg.out, REPORT_DIR), world.grid)
    doc = summary(trace)
    failures = doc["failures"]
    print(f"robot {doc['robot_id']} (candidates: {', '.join(candidates) or 'none'}): "
          f"{len(doc['installed'])}/{len(plans)} installed, "
          f"run {doc['run_duration_s']:.1f} s, {doc['reorient_events']} reorient events")
    for p in doc["separation"]:
        flag = "  PROXIMITY ALERT" if p["proximity_alert"] else ""
        print(f"  min separation {p['pair'][0]}-{p['pair'][1]}: {p['min_distance_m']:.2f} m "
              f"at t={p['min_time_s']:.1f} s{flag}")
    if "notice" in doc:
        print(f"  {doc['notice']}")
    for f in failures:
        print(f"plan {f['plan']} ({f['element']}): action '{f['action']}' failed: "
              f"{f['cause']}: {f['detail']}", file=sys.stderr)
    status = EXIT_PLAN_FAILED if failures else EXIT_OK
    _update_manifest(cfg, "simulate", status, robot=doc["robot_id"], plans=len(plans),
                     installed=len(doc["installed"]),
                     failures=[{k: f[k] for k in ("plan", "element", "action", "cause")}
                               for f in failures],
                     **info)
    return status


def cmd_report(cfg: RunConfig) -> int:
    trace_path = cfg.trace or os.path.join(cfg.out, TRACE_FILE)
    if not os.path.isfile(trace_path):
        raise CliError(f"trace file not found: {trace_path}")
    trace = read_trace(trace_path)
    map_path = cfg.map or os.path.join(cfg.out, WORLD_DIR, "map.yaml")
    grid = read_map_pgm(map_path) if os.path.isfile(map_path) else None
    files = emit_report(trace, os.path.join(cfg.out, REPORT_DIR), grid)
    print(f"report: {', '.join(files)} -> {os.path.join(cfg.out, REPORT_DIR)}")
    _update_manifest(cfg, "report", EXIT_OK)
    return EXIT_OK


def cmd_pipeline(cfg: RunConfig) -> int:
    for stage in (cmd_derive, cmd_build_world, cmd_simulate):
        status = stage(cfg)
        if status and not (stage is cmd_derive and cfg.force and status == EXIT_UNSATISFIED):
            return status
    return EXIT_OK


COMMANDS = {
    "validate": (cmd_validate, "check every input file and cross reference"),
    "derive": (cmd_derive, "list the modeling requirements the project does not yet satisfy"),
    "build-world": (cmd_build_world, "emit SDF models, the occupancy map and a world manifest"),
    "simulate": (cmd_simulate, "match a robot, compile plans, run the simulation and report"),
    "report": (cmd_report, "regenerate the report from an existing trace"),
    "pipeline": (cmd_pipeline, "derive, build-world and simulate in sequence"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bimrobo", description=__doc__.split("\n\n")[0],
        epilog="exit codes: 0 ok, 1 input error, 2 unsatisfied requirements, 3 plan failure",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"bimrobo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--scenario", help="scenario config file, directory or bundled name "
                       f"({', '.join(bundled_scenarios())}); flags override its values")
        p.add_argument("--project", help="project manifest (YAML)")
        p.add_argument("--kb", action="append", help="knowledge-base file; repeat to merge "
                       "('default' is the shipped KB)")
        p.add_argument("--fleet", help="fleet file (default: shipped fleet)")
        p.add_argument("--agents", help="worker agent scripts (YAML)")
        p.add_argument("--out", default="run", help="run directory (default: ./run)")
        p.add_argument("--resolution", type=float, help="occupancy map cell size in m")
        p.add_argument("--z-band", type=float, nargs=2, metavar=("ZMIN", "ZMAX"),
                       help="height band sliced into the occupancy map")
        p.add_argument("--margin", type=float, help="free border around the site in m")
        if name in ("build-world", "simulate", "pipeline"):
            p.add_argument("--force", action="store_true",
                           help="proceed despite unsatisfied requirements (recorded in the manifest)")
        if name in ("simulate", "pipeline"):
            p.add_argument("--dt", type=float, help="trace sampling step in s")
            p.add_argument("--reorient-duration", type=float, help="seconds per carry reorientation")
            p.add_argument("--sim-margin", type=float, help="extra inflation beyond the robot half-width")
            p.add_argument("--horizon", type=float, help="run length when no plans exist")
            p.add_argument("--abort-on-failure", action="store_true",
                           help="stop after the first failed plan")
            p.add_argument("--robot", help="robot id to use among the qualifying robots")
        if name == "report":
            p.add_argument("--trace", help="trace file (default: <out>/trace.jsonl)")
            p.add_argument("--map", help="map sidecar YAML (default: <out>/world/map.yaml)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        if args.command == "report" and not args.scenario and not args.project:
            cfg = RunConfig(project=None, out=args.out, trace=args.trace, map=args.map)
        else:
            cfg = config_from_args(args)
        return func(cfg)
    except (CliError, InputError, SiteParamsError, RequirementError, SpecNotFound, TraceError,
            MalformedTrace, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
