"""Deterministic 2.5D robot backend: kinematics, collision pre-emption, sensors.

Motion commands integrate in fixed substeps and stop before the robot's
footprint can touch a wall; sensing is synthesized by exact ray casting and
range/field-of-view gated object glimpses. All randomness flows from one
seeded generator so that identical (environment, robot, seed, command
sequence) tuples replay bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import (
    InvalidCommand,
    InvalidEnvironment,
    ModeViolation,
    NotFound,
    SessionFinished,
    VariantMismatch,
)
from .pools import EnvironmentDef, RobotDef, environment_to_mapping

ODOM_SIGMA_TRANS = 0.01  # drift std, metres per metre travelled
ODOM_SIGMA_ROT = 0.005  # drift std, radians per radian turned
MAX_COMMAND_VALUE = 100.0
DIST_EPS = 1e-9  # absorbs float noise in clearance comparisons

Pose = tuple[float, float, float]

ACTIVE_KINDS = ("move_distance", "rotate_angle")
PASSIVE_KINDS = ("move_next",)


@dataclass
class MotionCommand:
    kind: str
    value: float | None = None


@dataclass
class ActionOutcome:
    status: str  # completed | obstructed | finished_trajectory
    distance_travelled: float = 0.0
    angle_turned: float = 0.0

    def to_payload(self) -> dict:
        return {
            "status": self.status,
            "distance_travelled": self.distance_travelled,
            "angle_turned": self.angle_turned,
        }


@dataclass
class SensorFrame:
    kind: str  # pose | laser | object_glimpse
    pose: Pose | None = None
    laser: list | None = None
    glimpses: list | None = None

    def to_payload(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "pose":
            out["pose"] = list(self.pose)
        elif self.kind == "laser":
            out["laser"] = [list(pair) for pair in self.laser]
        else:
            out["glimpses"] = [
                {
                    "class": g[0],
                    "centroid": list(g[1]),
                    "extent": list(g[2]),
                    "range": g[3],
                }
                for g in self.glimpses
            ]
        return out


@dataclass
class WorldState:
    env: EnvironmentDef
    robot: RobotDef
    seed: int
    localisation: str
    pose_true: Pose
    pose_odom: Pose
    trajectory_cursor: int = 0
    collided: bool = False
    finished: bool = False
    step_count: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)


def init_world(env: EnvironmentDef, robot: RobotDef, seed: int, localisation: str = "ground_truth") -> WorldState:
    """Fresh world at the environment's start pose with a freshly seeded rng."""
    walls = geometry.walls_array(env.walls)
    if geometry.min_wall_distance(env.start_pose, walls) < robot.radius:
        raise InvalidEnvironment(
            f"start pose of '{env.env_id}' is in collision at robot radius {robot.radius}"
        )
    start = tuple(float(v) for v in env.start_pose)
    return WorldState(
        env=env,
        robot=robot,
        seed=int(seed),
        localisation=localisation,
        pose_true=start,
        pose_odom=start,
        rng=np.random.default_rng(int(seed)),
    )


def reset(state: WorldState) -> WorldState:
    """Back to the consistent starting state, reseeding the generator."""
    return init_world(state.env, state.robot, state.seed, state.localisation)


def apply_variant(state: WorldState, env_variant: EnvironmentDef) -> WorldState:
    """Swap in a sibling variant; pose/cursor/flags reset, rng state carries over."""
    if env_variant.name != state.env.name:
        raise VariantMismatch(
            f"variant '{env_variant.env_id}' does not belong to environment '{state.env.name}'"
        )
    walls = geometry.walls_array(env_variant.walls)
    if geometry.min_wall_distance(env_variant.start_pose, walls) < state.robot.radius:
        raise InvalidEnvironment(
            f"start pose of '{env_variant.env_id}' is in collision at robot radius {state.robot.radius}"
        )
    start = tuple(float(v) for v in env_variant.start_pose)
    return WorldState(
        env=env_variant,
        robot=state.robot,
        seed=state.seed,
        localisation=state.localisation,
        pose_true=start,
        pose_odom=start,
        rng=state.rng,
    )


# ---------------------------------------------------------------------------
# motion

def _advance_odometry(state: WorldState, old_true: Pose, new_true: Pose) -> None:
    if state.localisation != "noisy":
        state.pose_odom = state.pose_true
        return
    ox, oy, oyaw = old_true
    nx, ny, nyaw = new_true
    # actual motion expressed in the frame of the previous true pose
    dx, dy = nx - ox, ny - oy
    rel_x = math.cos(oyaw) * dx + math.sin(oyaw) * dy
    rel_y = -math.sin(oyaw) * dx + math.cos(oyaw) * dy
    rel_yaw = geometry.normalize_angle(nyaw - oyaw)
    travelled = math.hypot(rel_x, rel_y)
    sigma_t = ODOM_SIGMA_TRANS * travelled
    sigma_r = ODOM_SIGMA_ROT * abs(rel_yaw)
    noisy_x = rel_x + state.rng.normal(0.0, sigma_t)
    noisy_y = rel_y + state.rng.normal(0.0, sigma_t)
    noisy_yaw = rel_yaw + state.rng.normal(0.0, sigma_r)
    px, py, pyaw = state.pose_odom
    state.pose_odom = (
        px + math.cos(pyaw) * noisy_x - math.sin(pyaw) * noisy_y,
        py + math.sin(pyaw) * noisy_x + math.cos(pyaw) * noisy_y,
        geometry.normalize_angle(pyaw + noisy_yaw),
    )


def _move_distance(state: WorldState, distance: float) -> ActionOutcome:
    x, y, yaw = state.pose_true
    robot = state.robot
    walls = geometry.walls_array(state.env.walls)
    total = abs(distance)
    sign = 1.0 if distance >= 0 else -1.0
    if total == 0.0:
        return ActionOutcome(status="completed")
    n_full = int(math.floor(total / robot.substep + 1e-12))
    arcs = [robot.substep * k for k in range(1, n_full + 1)]
    if not arcs or arcs[-1] < total - 1e-12:
        arcs.append(total)
    arcs_np = np.asarray(arcs)
    dir_x, dir_y = sign * math.cos(yaw), sign * math.sin(yaw)
    candidates = np.column_stack((x + arcs_np * dir_x, y + arcs_np * dir_y))
    clearance_needed = robot.radius + robot.safety_margin
    if walls.shape[0]:
        dists = geometry.points_to_segments_distance(candidates, walls).min(axis=1)
        blocked = dists + DIST_EPS < clearance_needed
        first_blocked = int(np.argmax(blocked)) if blocked.any() else len(arcs)
    else:
        first_blocked = len(arcs)
    travelled = arcs[first_blocked - 1] if first_blocked > 0 else 0.0
    state.pose_true = (x + travelled * dir_x, y + travelled * dir_y, yaw)
    obstructed = travelled < total - 1e-12
    return ActionOutcome(
        status="obstructed" if obstructed else "completed",
        distance_travelled=sign * travelled,
    )


def _rotate_angle(state: WorldState, angle: float) -> ActionOutcome:
    x, y, yaw = state.pose_true
    state.pose_true = (x, y, geometry.normalize_angle(yaw + angle))
    return ActionOutcome(status="completed", angle_turned=angle)


def _move_next(state: WorldState) -> ActionOutcome:
    trajectory = state.env.trajectory
    if state.trajectory_cursor >= len(trajectory):
        state.finished = True
        return ActionOutcome(status="finished_trajectory")
    old = state.pose_true
    target = tuple(float(v) for v in trajectory[state.trajectory_cursor])
    state.pose_true = target
    state.trajectory_cursor += 1
    # authored poses are trusted (validated at load); a colliding one is a
    # content error, flagged rather than prevented
    walls = geometry.walls_array(state.env.walls)
    if geometry.min_wall_distance(target, walls) < state.robot.radius:
        state.collided = True
    if state.trajectory_cursor >= len(trajectory):
        state.finished = True
        status = "finished_trajectory"
    else:
        status = "completed"
    return ActionOutcome(
        status=status,
        distance_travelled=math.hypot(target[0] - old[0], target[1] - old[1]),
        angle_turned=geometry.normalize_angle(target[2] - old[2]),
    )


def step_motion(state: WorldState, cmd: MotionCommand, control_mode: str) -> tuple[WorldState, ActionOutcome]:
    """Execute one motion command, mutating the state in place."""
    if state.finished:
        raise SessionFinished("trajectory already finished; reset to continue")
    if cmd.kind not in ACTIVE_KINDS + PASSIVE_KINDS:
        raise InvalidCommand(f"unknown motion command '{cmd.kind}'")
    allowed = ACTIVE_KINDS if control_mode == "active" else PASSIVE_KINDS
    if cmd.kind not in allowed:
        raise ModeViolation(f"command '{cmd.kind}' is not permitted in {control_mode} mode")
    if cmd.kind in ("move_distance", "rotate_angle"):
        if cmd.value is None or not isinstance(cmd.value, (int, float)) or isinstance(cmd.value, bool):
            raise InvalidCommand(f"command '{cmd.kind}' requires a numeric value")
        value = float(cmd.value)
        if not math.isfinite(value) or abs(value) > MAX_COMMAND_VALUE:
            raise InvalidCommand(f"command value {cmd.value} out of range")
    old_true = state.pose_true
    if cmd.kind == "move_distance":
        outcome = _move_distance(state, float(cmd.value))
    elif cmd.kind == "rotate_angle":
        outcome = _rotate_angle(state, float(cmd.value))
    else:
        outcome = _move_next(state)
    _advance_odometry(state, old_true, state.pose_true)
    state.step_count += 1
    return state, outcome


# ---------------------------------------------------------------------------
# sensing

def sense(state: WorldState, topic: str) -> SensorFrame:
    """Synthesize one sensor frame for a backend topic."""
    if topic == "pose":
        pose = state.pose_true if state.localisation == "ground_truth" else state.pose_odom
        return SensorFrame(kind="pose", pose=tuple(pose))
    if topic == "laser":
        return _sense_laser(state)
    if topic == "object_glimpse":
        return _sense_glimpse(state)
    raise NotFound(f"unknown sensor topic '{topic}'")


def _sense_laser(state: WorldState) -> SensorFrame:
    x, y, yaw = state.pose_true
    robot = state.robot
    walls = geometry.walls_array(state.env.walls)
    readings = []
    for rel in np.linspace(-math.pi / 2, math.pi / 2, robot.laser_beam_count):
        rng_val = geometry.cast_ray((x, y), yaw + rel, walls, robot.laser_max_range)
        readings.append((float(rel), rng_val))
    return SensorFrame(kind="laser", laser=readings)


def _sense_glimpse(state: WorldState) -> SensorFrame:
    x, y, yaw = state.pose_true
    robot = state.robot
    glimpses = []
    for obj in state.env.objects:
        dx, dy = obj.centroid[0] - x, obj.centroid[1] - y
        planar_range = math.hypot(dx, dy)
        if planar_range > robot.glimpse_range:
            continue
        bearing = geometry.normalize_angle(math.atan2(dy, dx) - yaw)
        if abs(bearing) > robot.glimpse_fov:
            continue
        noise = state.rng.normal(0.0, robot.glimpse_sigma, size=3)
        centroid = tuple(float(c + n) for c, n in zip(obj.centroid, noise))
        glimpses.append((obj.class_name, centroid, tuple(obj.extent), planar_range))
    return SensorFrame(kind="object_glimpse", glimpses=glimpses)


def world_state_to_payload(state: WorldState) -> dict:
    """Debug dump: the environment mapping plus runtime fields."""
    payload = environment_to_mapping(state.env)
    payload.update(
        {
            "pose_true": list(state.pose_true),
            "pose_odom": list(state.pose_odom),
            "trajectory_cursor": state.trajectory_cursor,
            "collided": state.collided,
            "finished": state.finished,
            "step_count": state.step_count,
            "seed": state.seed,
            "localisation": state.localisation,
        }
    )
    return payload
