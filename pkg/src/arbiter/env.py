"""Planar reach-and-avoid workspace with a velocity-controlled gripper.

A square table seen from above: goal discs sit on the far edge, a circular
obstacle is sampled in the middle band, and the gripper starts on the near
side so the obstacle blocks the straight line to the goal centroid.
Collisions and boundary contact are recorded as events, never simulated as
physics; the gripper may pass through the obstacle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_PLACEMENT_ATTEMPTS = 1000


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def clamp_speed(velocity: np.ndarray, max_speed: float) -> np.ndarray:
    """Scale a velocity command down to the speed limit, keeping direction."""
    velocity = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(velocity))
    if speed <= max_speed or speed == 0.0:
        return velocity.copy()
    return velocity * (max_speed / speed)


@dataclass(frozen=True)
class EnvConfig:
    workspace_side: float = 0.5
    goal_count: int = 3
    goal_radius: float = 0.02
    obstacle_radius: float = 0.06
    reach_radius: float = 0.02
    dt: float = 0.05
    max_steps: int = 200
    max_speed: float = 0.2

    def __post_init__(self) -> None:
        if self.workspace_side <= 0:
            raise ConfigurationError("workspace_side must be positive")
        if self.goal_count < 2:
            raise ConfigurationError("goal_count must be at least 2")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.reach_radius <= 0:
            raise ConfigurationError("reach_radius must be positive")
        if self.goal_radius <= 0:
            raise ConfigurationError("goal_radius must be positive")
        if not 0 < self.obstacle_radius < self.workspace_side / 4:
            raise ConfigurationError(
                "obstacle_radius must lie in (0, workspace_side/4)"
            )
        if self.max_steps <= 0 or self.max_speed <= 0:
            raise ConfigurationError("max_steps and max_speed must be positive")


@dataclass(eq=False)
class WorkspaceState:
    gripper_pos: np.ndarray
    gripper_vel: np.ndarray
    gripper_heading: float
    obstacle_pos: np.ndarray
    goal_positions: np.ndarray  # (G, 2)
    step_index: int = 0


@dataclass(frozen=True)
class EnvEvents:
    obstacle_collision: bool = False
    boundary_contact: bool = False
    goal_reached: int | None = None
    terminated: bool = False


def _segment_point_distance(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> float:
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip(np.dot(p - a, ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def reset(config: EnvConfig, seed: int) -> WorkspaceState:
    """Sample a fresh scene. Identical seeds give bitwise-identical states.

    Goals are spread along the far edge with pairwise separation of at least
    two goal radii, the obstacle lands in the middle third of the depth, and
    the gripper is placed on the near side so that the straight line to the
    goal centroid passes through the obstacle disc.
    """
    rng = np.random.default_rng(seed)
    side = config.workspace_side
    edge_y = side - config.goal_radius

    xs: list[float] = []
    for _ in range(_PLACEMENT_ATTEMPTS):
        x = float(rng.uniform(config.goal_radius, side - config.goal_radius))
        if all(abs(x - other) >= 2.0 * config.goal_radius for other in xs):
            xs.append(x)
            if len(xs) == config.goal_count:
                break
    if len(xs) < config.goal_count:
        raise ConfigurationError("could not place goals with required separation")
    goals = np.array([[x, edge_y] for x in xs], dtype=float)

    # An obstacle far off the centroid line may admit no blocked start, so
    # obstacle and gripper are rejection-sampled jointly.
    centroid = goals.mean(axis=0)
    margin = config.reach_radius
    clearance = config.obstacle_radius + config.goal_radius
    obstacle = None
    gripper = None
    for _ in range(_PLACEMENT_ATTEMPTS // 5):
        candidate_obstacle = rng.uniform(
            [config.obstacle_radius, side / 3.0],
            [side - config.obstacle_radius, 2.0 * side / 3.0],
        )
        if np.min(np.linalg.norm(goals - candidate_obstacle, axis=1)) <= clearance:
            continue
        for _ in range(50):
            candidate = np.array(
                [
                    rng.uniform(margin, side - margin),
                    rng.uniform(margin, side / 6.0),
                ]
            )
            if np.linalg.norm(candidate - candidate_obstacle) <= config.obstacle_radius + margin:
                continue
            if _segment_point_distance(candidate, centroid, candidate_obstacle) < config.obstacle_radius:
                obstacle = candidate_obstacle
                gripper = candidate
                break
        if gripper is not None:
            break
    if gripper is None or obstacle is None:
        raise ConfigurationError("could not place gripper behind the obstacle")

    to_centroid = centroid - gripper
    heading = wrap_angle(math.atan2(to_centroid[1], to_centroid[0]))
    return WorkspaceState(
        gripper_pos=gripper,
        gripper_vel=np.zeros(2),
        gripper_heading=heading,
        obstacle_pos=obstacle,
        goal_positions=goals,
        step_index=0,
    )


def step(
    state: WorkspaceState, action: np.ndarray, config: EnvConfig
) -> tuple[WorkspaceState, EnvEvents]:
    """Advance one tick. Pure: neither argument is mutated.

    The commanded velocity is norm-clamped to max_speed, positions are
    clamped to the workspace (flagging boundary contact), and reaching any
    goal disc terminates the episode.
    """
    action = np.asarray(action, dtype=float)
    if action.shape != (2,) or not np.all(np.isfinite(action)):
        raise ValueError("action must be a finite 2D velocity command")

    velocity = clamp_speed(action, config.max_speed)
    raw = state.gripper_pos + velocity * config.dt
    pos = np.clip(raw, 0.0, config.workspace_side)
    boundary = bool(np.any(raw != pos))

    displacement = pos - state.gripper_pos
    if float(np.linalg.norm(displacement)) > 0.0:
        heading = wrap_angle(math.atan2(displacement[1], displacement[0]))
    else:
        heading = state.gripper_heading

    goal_dists = np.linalg.norm(state.goal_positions - pos, axis=1)
    reached: int | None = None
    if np.any(goal_dists < config.reach_radius):
        reached = int(np.argmin(goal_dists))

    collision = float(np.linalg.norm(pos - state.obstacle_pos)) < config.obstacle_radius
    step_index = state.step_index + 1
    terminated = reached is not None or step_index >= config.max_steps

    next_state = WorkspaceState(
        gripper_pos=pos,
        gripper_vel=velocity,
        gripper_heading=heading,
        obstacle_pos=state.obstacle_pos,
        goal_positions=state.goal_positions,
        step_index=step_index,
    )
    events = EnvEvents(
        obstacle_collision=collision,
        boundary_contact=boundary,
        goal_reached=reached,
        terminated=terminated,
    )
    return next_state, events


def distances(state: WorkspaceState, config: EnvConfig) -> tuple[np.ndarray, float]:
    """Per-goal Euclidean distances and obstacle surface distance (floored at 0)."""
    goal_dists = np.linalg.norm(state.goal_positions - state.gripper_pos, axis=1)
    center = float(np.linalg.norm(state.gripper_pos - state.obstacle_pos))
    return goal_dists, max(0.0, center - config.obstacle_radius)
