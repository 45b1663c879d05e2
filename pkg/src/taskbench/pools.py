"""Declarative option pools: tasks, robots, environments, and evaluation methods.

Each pool entry lives in its own YAML file under ``<root>/{tasks,robots,
environments,eval_methods}/``. Entries are keyed by their ``name`` field
(environments by ``name:variant``), never by filename.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import geometry
from .errors import (
    CapabilityMissing,
    DuplicateDefinition,
    IncompatibleSelection,
    NotFound,
    ParseError,
    SceneCountMismatch,
)

TASK_TYPES = ("semantic_slam", "scd")
CONTROL_MODES = ("active", "passive")
LOCALISATION_MODES = ("ground_truth", "noisy")
PLATFORM_KINDS = ("sim", "real")
CHANNELS = ("sensor", "actuator")

SIM_SENSOR_TOPICS = ("pose", "laser", "object_glimpse")
SIM_ACTUATOR_TOPICS = ("move_distance", "rotate_angle", "move_next")

DEFAULT_ROBOT_RADIUS = 0.2
POOL_KINDS = ("tasks", "robots", "environments", "eval_methods")


@dataclass(frozen=True)
class TaskDef:
    """A research task: capabilities it needs and how its results are scored."""

    name: str
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    results_format: str
    eval_method: str
    scene_count: int

    @property
    def task_type(self) -> str:
        return self.name.split(":")[0]

    @property
    def control_mode(self) -> str:
        return self.name.split(":")[1]

    @property
    def localisation(self) -> str:
        return self.name.split(":")[2]


@dataclass(frozen=True)
class Connection:
    channel: str
    backend_topic: str


@dataclass(frozen=True)
class RobotDef:
    """A robot platform: named sensor/actuator connections plus sim parameters."""

    name: str
    kind: str
    connections: dict[str, Connection]
    radius: float = DEFAULT_ROBOT_RADIUS
    substep: float = 0.01
    safety_margin: float = 0.01
    laser_beam_count: int = 31
    laser_max_range: float = 10.0
    glimpse_range: float = 3.0
    glimpse_fov: float = math.pi / 4
    glimpse_sigma: float = 0.02


@dataclass(frozen=True)
class GroundTruthObject:
    class_name: str
    centroid: tuple[float, float, float]
    extent: tuple[float, float, float]
    state: str = "constant"


@dataclass(frozen=True)
class EnvironmentDef:
    """One environment variant: geometry, authored trajectory, and objects."""

    name: str
    variant: int
    kind: str
    bounds: tuple[float, float, float, float]
    walls: tuple
    start_pose: tuple[float, float, float]
    trajectory: tuple
    objects: tuple[GroundTruthObject, ...]
    class_list: tuple[str, ...]

    @property
    def env_id(self) -> str:
        return f"{self.name}:{self.variant}"


@dataclass(frozen=True)
class EvalMethodDef:
    name: str
    description: str = ""


@dataclass(frozen=True)
class ResolvedConfig:
    """A validated selection, ready to drive one supervisor session."""

    task: TaskDef
    robot: RobotDef
    environments: tuple[EnvironmentDef, ...]
    eval_method: str
    seed: int


@dataclass(frozen=True)
class Pools:
    tasks: dict[str, TaskDef] = field(default_factory=dict)
    robots: dict[str, RobotDef] = field(default_factory=dict)
    environments: dict[str, EnvironmentDef] = field(default_factory=dict)
    eval_methods: dict[str, EvalMethodDef] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing helpers

def _load_yaml(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ParseError(path, f"invalid YAML: {exc.problem}", line=line) from exc
    except yaml.YAMLError as exc:
        raise ParseError(path, f"invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(path, "definition must be a mapping")
    return data


def _check_fields(data: dict, required, optional, path: Path):
    for key in required:
        if key not in data:
            raise ParseError(path, f"missing required field '{key}'")
    for key in data:
        if key not in required and key not in optional:
            raise ParseError(path, f"unknown field '{key}'")


def _as_float(value, name: str, path: Path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, f"field '{name}' must be a number")
    out = float(value)
    if not math.isfinite(out):
        raise ParseError(path, f"field '{name}' must be finite")
    return out


def _as_int(value, name: str, path: Path) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(path, f"field '{name}' must be an integer")
    return value


def _as_str(value, name: str, path: Path) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(path, f"field '{name}' must be a non-empty string")
    return value


def _as_str_list(value, name: str, path: Path) -> tuple[str, ...]:
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise ParseError(path, f"field '{name}' must be a list of strings")
    return tuple(value)


def _as_pose(value, name: str, path: Path) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ParseError(path, f"field '{name}' must be [x, y, yaw]")
    return tuple(_as_float(v, name, path) for v in value)


def _as_triple(value, name: str, path: Path) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ParseError(path, f"field '{name}' must have three components")
    return tuple(_as_float(v, name, path) for v in value)


# ---------------------------------------------------------------------------
# per-kind loaders

def _parse_task(data: dict, path: Path) -> TaskDef:
    _check_fields(
        data,
        required=("name", "actions", "observations", "results_format", "eval_method", "scene_count"),
        optional=(),
        path=path,
    )
    task = TaskDef(
        name=_as_str(data["name"], "name", path),
        actions=_as_str_list(data["actions"], "actions", path),
        observations=_as_str_list(data["observations"], "observations", path),
        results_format=_as_str(data["results_format"], "results_format", path),
        eval_method=_as_str(data["eval_method"], "eval_method", path),
        scene_count=_as_int(data["scene_count"], "scene_count", path),
    )
    parts = task.name.split(":")
    if len(parts) != 3:
        raise ParseError(path, f"task name '{task.name}' must be <type>:<control_mode>:<localisation>")
    if task.task_type not in TASK_TYPES:
        raise ParseError(path, f"unknown task type '{task.task_type}'")
    if task.control_mode not in CONTROL_MODES:
        raise ParseError(path, f"unknown control mode '{task.control_mode}'")
    if task.localisation not in LOCALISATION_MODES:
        raise ParseError(path, f"unknown localisation mode '{task.localisation}'")
    if (task.scene_count == 2) != (task.task_type == "scd"):
        raise ParseError(path, "scene_count must be 2 exactly for scd tasks")
    if task.scene_count not in (1, 2):
        raise ParseError(path, "scene_count must be 1 or 2")
    if task.control_mode == "active" and not task.actions:
        raise ParseError(path, "active tasks must declare at least one action")
    if task.control_mode == "passive" and task.actions != ("move_next",):
        raise ParseError(path, "passive tasks must declare exactly ['move_next']")
    if not task.observations:
        raise ParseError(path, "tasks must declare at least one observation")
    return task


def _parse_robot(data: dict, path: Path) -> RobotDef:
    _check_fields(
        data,
        required=("name", "kind", "connections"),
        optional=(
            "radius",
            "substep",
            "safety_margin",
            "laser_beam_count",
            "laser_max_range",
            "glimpse_range",
            "glimpse_fov",
            "glimpse_sigma",
        ),
        path=path,
    )
    kind = _as_str(data["kind"], "kind", path)
    if kind not in PLATFORM_KINDS:
        raise ParseError(path, f"robot kind must be one of {PLATFORM_KINDS}")
    raw_conns = data["connections"]
    if not isinstance(raw_conns, dict) or not raw_conns:
        raise ParseError(path, "field 'connections' must be a non-empty mapping")
    connections = {}
    for conn_name, conn in raw_conns.items():
        if not isinstance(conn, dict):
            raise ParseError(path, f"connection '{conn_name}' must be a mapping")
        _check_fields(conn, required=("channel", "backend_topic"), optional=(), path=path)
        channel = _as_str(conn["channel"], "channel", path)
        if channel not in CHANNELS:
            raise ParseError(path, f"connection '{conn_name}' channel must be one of {CHANNELS}")
        connections[conn_name] = Connection(
            channel=channel,
            backend_topic=_as_str(conn["backend_topic"], "backend_topic", path),
        )
    numeric = {}
    for key in ("radius", "substep", "safety_margin", "laser_max_range", "glimpse_range", "glimpse_fov", "glimpse_sigma"):
        if key in data:
            numeric[key] = _as_float(data[key], key, path)
    if "laser_beam_count" in data:
        numeric["laser_beam_count"] = _as_int(data["laser_beam_count"], "laser_beam_count", path)
    robot = RobotDef(
        name=_as_str(data["name"], "name", path),
        kind=kind,
        connections=connections,
        **numeric,
    )
    if robot.radius <= 0 or robot.substep <= 0 or robot.safety_margin < 0:
        raise ParseError(path, "radius and substep must be positive, safety_margin non-negative")
    if robot.laser_beam_count < 1 or robot.laser_max_range <= 0:
        raise ParseError(path, "laser parameters must be positive")
    if robot.glimpse_range <= 0 or robot.glimpse_fov <= 0 or robot.glimpse_sigma < 0:
        raise ParseError(path, "glimpse parameters out of range")
    return robot


def _parse_environment(data: dict, path: Path) -> EnvironmentDef:
    _check_fields(
        data,
        required=("name", "variant", "kind", "bounds", "walls", "start_pose", "trajectory", "objects", "class_list"),
        optional=(),
        path=path,
    )
    kind = _as_str(data["kind"], "kind", path)
    if kind not in PLATFORM_KINDS:
        raise ParseError(path, f"environment kind must be one of {PLATFORM_KINDS}")
    variant = _as_int(data["variant"], "variant", path)
    if variant < 1:
        raise ParseError(path, "variant must be >= 1")
    bounds_raw = data["bounds"]
    if not isinstance(bounds_raw, list) or len(bounds_raw) != 4:
        raise ParseError(path, "field 'bounds' must be [xmin, ymin, xmax, ymax]")
    bounds = tuple(_as_float(v, "bounds", path) for v in bounds_raw)
    if bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        raise ParseError(path, "bounds rectangle is empty")
    walls_raw = data["walls"]
    if not isinstance(walls_raw, list):
        raise ParseError(path, "field 'walls' must be a list of segments")
    walls = []
    for seg in walls_raw:
        if not isinstance(seg, list) or len(seg) != 2:
            raise ParseError(path, "each wall must be [[x1, y1], [x2, y2]]")
        pts = []
        for pt in seg:
            if not isinstance(pt, list) or len(pt) != 2:
                raise ParseError(path, "each wall endpoint must be [x, y]")
            pts.append(tuple(_as_float(v, "walls", path) for v in pt))
        walls.append(tuple(pts))
    class_list = _as_str_list(data["class_list"], "class_list", path)
    objects_raw = data["objects"]
    if not isinstance(objects_raw, list):
        raise ParseError(path, "field 'objects' must be a list")
    objects = []
    for i, obj in enumerate(objects_raw):
        if not isinstance(obj, dict):
            raise ParseError(path, f"objects[{i}] must be a mapping")
        _check_fields(obj, required=("class", "centroid", "extent"), optional=(), path=path)
        extent = _as_triple(obj["extent"], f"objects[{i}].extent", path)
        if any(e <= 0 for e in extent):
            raise ParseError(path, f"objects[{i}].extent components must be positive")
        objects.append(
            GroundTruthObject(
                class_name=_as_str(obj["class"], f"objects[{i}].class", path),
                centroid=_as_triple(obj["centroid"], f"objects[{i}].centroid", path),
                extent=extent,
            )
        )
    trajectory_raw = data["trajectory"]
    if not isinstance(trajectory_raw, list):
        raise ParseError(path, "field 'trajectory' must be a list of poses")
    trajectory = tuple(_as_pose(p, "trajectory", path) for p in trajectory_raw)
    env = EnvironmentDef(
        name=_as_str(data["name"], "name", path),
        variant=variant,
        kind=kind,
        bounds=bounds,
        walls=tuple(walls),
        start_pose=_as_pose(data["start_pose"], "start_pose", path),
        trajectory=trajectory,
        objects=tuple(objects),
        class_list=class_list,
    )
    for problem in environment_problems(env, DEFAULT_ROBOT_RADIUS):
        raise ParseError(path, problem)
    return env


def _parse_eval_method(data: dict, path: Path) -> EvalMethodDef:
    _check_fields(data, required=("name",), optional=("description",), path=path)
    return EvalMethodDef(
        name=_as_str(data["name"], "name", path),
        description=str(data.get("description", "")),
    )


def environment_problems(env: EnvironmentDef, radius: float) -> list[str]:
    """Geometric validity problems for an environment at a given robot radius."""
    problems = []
    walls = geometry.walls_array(env.walls)
    poses = [("start_pose", env.start_pose)] + [
        (f"trajectory[{i}]", p) for i, p in enumerate(env.trajectory)
    ]
    for label, pose in poses:
        if not geometry.point_in_bounds(pose, env.bounds):
            problems.append(f"{label} lies outside bounds")
        if geometry.min_wall_distance(pose, walls) < radius:
            problems.append(f"{label} is in collision at robot radius {radius}")
    for i, obj in enumerate(env.objects):
        if obj.class_name not in env.class_list:
            problems.append(f"objects[{i}] class '{obj.class_name}' missing from class_list")
        cx, cy = obj.centroid[0], obj.centroid[1]
        hx, hy = obj.extent[0] / 2.0, obj.extent[1] / 2.0
        if not (
            geometry.point_in_bounds((cx - hx, cy - hy), env.bounds)
            and geometry.point_in_bounds((cx + hx, cy + hy), env.bounds)
        ):
            problems.append(f"objects[{i}] box extends outside bounds")
    return problems


_PARSERS = {
    "tasks": _parse_task,
    "robots": _parse_robot,
    "environments": _parse_environment,
    "eval_methods": _parse_eval_method,
}


def _identifier(kind: str, definition) -> str:
    if kind == "environments":
        return definition.env_id
    return definition.name


def load_pool(root_dir) -> Pools:
    """Load every definition under root_dir into pools keyed by identifier."""
    root = Path(root_dir)
    for kind in POOL_KINDS:
        if not (root / kind).is_dir():
            raise ParseError(root, f"pool root is missing the '{kind}/' subdirectory")
    loaded = {}
    for kind in POOL_KINDS:
        entries = {}
        for path in sorted((root / kind).glob("*.yaml")):
            definition = _PARSERS[kind](_load_yaml(path), path)
            ident = _identifier(kind, definition)
            if ident in entries:
                raise DuplicateDefinition(f"duplicate {kind} identifier '{ident}' in {path}")
            entries[ident] = definition
        loaded[kind] = entries
    return Pools(**loaded)


# ---------------------------------------------------------------------------
# serialization (round-trips through load_pool)

def task_to_mapping(task: TaskDef) -> dict:
    return {
        "name": task.name,
        "actions": list(task.actions),
        "observations": list(task.observations),
        "results_format": task.results_format,
        "eval_method": task.eval_method,
        "scene_count": task.scene_count,
    }


def robot_to_mapping(robot: RobotDef) -> dict:
    return {
        "name": robot.name,
        "kind": robot.kind,
        "connections": {
            name: {"channel": c.channel, "backend_topic": c.backend_topic}
            for name, c in robot.connections.items()
        },
        "radius": robot.radius,
        "substep": robot.substep,
        "safety_margin": robot.safety_margin,
        "laser_beam_count": robot.laser_beam_count,
        "laser_max_range": robot.laser_max_range,
        "glimpse_range": robot.glimpse_range,
        "glimpse_fov": robot.glimpse_fov,
        "glimpse_sigma": robot.glimpse_sigma,
    }


def environment_to_mapping(env: EnvironmentDef) -> dict:
    return {
        "name": env.name,
        "variant": env.variant,
        "kind": env.kind,
        "bounds": list(env.bounds),
        "walls": [[list(p) for p in seg] for seg in env.walls],
        "start_pose": list(env.start_pose),
        "trajectory": [list(p) for p in env.trajectory],
        "objects": [
            {"class": o.class_name, "centroid": list(o.centroid), "extent": list(o.extent)}
            for o in env.objects
        ],
        "class_list": list(env.class_list),
    }


def eval_method_to_mapping(method: EvalMethodDef) -> dict:
    out = {"name": method.name}
    if method.description:
        out["description"] = method.description
    return out


_SERIALIZERS = {
    "tasks": task_to_mapping,
    "robots": robot_to_mapping,
    "environments": environment_to_mapping,
    "eval_methods": eval_method_to_mapping,
}


def save_pool(pools: Pools, root_dir) -> None:
    """Write pools back out as one YAML file per definition."""
    root = Path(root_dir)
    for kind in POOL_KINDS:
        directory = root / kind
        directory.mkdir(parents=True, exist_ok=True)
        for ident, definition in getattr(pools, kind).items():
            filename = ident.replace(":", "_") + ".yaml"
            with open(directory / filename, "w", encoding="utf-8") as fh:
                yaml.safe_dump(_SERIALIZERS[kind](definition), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# selection

def list_options(pools: Pools, kind: str) -> list[str]:
    """Lexicographically sorted identifiers for one pool kind."""
    if kind not in POOL_KINDS:
        raise NotFound(f"unknown pool kind '{kind}'")
    return sorted(getattr(pools, kind).keys())


def validate_selection(pools: Pools, task_id: str, robot_id: str, env_ids, seed: int = 0) -> ResolvedConfig:
    """Resolve a user selection into a runnable configuration or raise."""
    task = pools.tasks.get(task_id)
    if task is None:
        raise NotFound(f"unknown task '{task_id}'")
    robot = pools.robots.get(robot_id)
    if robot is None:
        raise NotFound(f"unknown robot '{robot_id}'")
    env_ids = list(env_ids)
    environments = []
    for env_id in env_ids:
        env = pools.environments.get(env_id)
        if env is None:
            raise NotFound(f"unknown environment '{env_id}'")
        environments.append(env)
    if len(environments) != task.scene_count:
        raise SceneCountMismatch(
            f"task '{task_id}' needs {task.scene_count} environment(s), got {len(environments)}"
        )
    if task.scene_count == 2:
        names = {e.name for e in environments}
        variants = {e.variant for e in environments}
        if len(names) != 1 or len(variants) != 2:
            raise IncompatibleSelection(
                "incompatible selection: scene change detection needs two variants of one environment"
            )
    for env in environments:
        if robot.kind == "real" and env.kind == "sim":
            raise IncompatibleSelection(
                f"incompatible selection: real robot '{robot_id}' cannot run in simulated environment '{env.env_id}'"
            )
        if robot.kind == "sim" and env.kind != "sim":
            raise IncompatibleSelection(
                f"incompatible selection: simulated robot '{robot_id}' cannot run in real environment '{env.env_id}'"
            )
    for name, channel in [(a, "actuator") for a in task.actions] + [(o, "sensor") for o in task.observations]:
        conn = robot.connections.get(name)
        if conn is None or conn.channel != channel:
            raise CapabilityMissing(f"robot '{robot_id}' has no {channel} connection '{name}'")
        if robot.kind == "sim":
            topics = SIM_ACTUATOR_TOPICS if channel == "actuator" else SIM_SENSOR_TOPICS
            if conn.backend_topic not in topics:
                raise CapabilityMissing(
                    f"connection '{name}' maps to unsupported backend topic '{conn.backend_topic}'"
                )
    if task.eval_method not in pools.eval_methods:
        raise NotFound(f"unknown evaluation method '{task.eval_method}'")
    for env in environments:
        problems = environment_problems(env, robot.radius)
        if problems:
            raise IncompatibleSelection(
                f"incompatible selection: environment '{env.env_id}' does not fit robot "
                f"'{robot_id}': {problems[0]}"
            )
    return ResolvedConfig(
        task=task,
        robot=robot,
        environments=tuple(environments),
        eval_method=task.eval_method,
        seed=int(seed),
    )
