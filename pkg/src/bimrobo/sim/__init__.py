"""Plan compilation, path planning and the kinematic simulation."""

from .agents import AgentScript, load_agents
from .compile import ActionPlan, BoundAction, CompileError, MapRef, compile_plan, standoff_pose
from .engine import SimParams, object_pose, run
from .orient import HORIZONTAL, SIDEWAYS, OrientationError, orientation_fit
from .planner import Path, PlanningError, inflate, plan_path
from .trace import Event, Tick, Trace, read_trace, write_trace

__all__ = [
    "AgentScript", "load_agents", "ActionPlan", "BoundAction", "CompileError", "MapRef",
    "compile_plan", "standoff_pose", "SimParams", "object_pose", "run", "HORIZONTAL", "SIDEWAYS",
    "OrientationError", "orientation_fit", "Path", "PlanningError", "inflate", "plan_path",
    "Event", "Tick", "Trace", "read_trace", "write_trace",
]
