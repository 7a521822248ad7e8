"""Goal-conditioned robot velocity fields.

Each sub-policy steers toward one goal disc: plain attraction far from the
obstacle, blended with a tangential circumnavigation term inside the
obstacle's influence zone. The routing side is the one whose tangent points
closest to the goal bearing (ties go counterclockwise), which is what makes
sub-policies for different goals diverge behind the obstacle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, WorkspaceState

INFLUENCE_FACTOR = 3.0  # influence zone radius, in obstacle radii (center distance)
ARRIVAL_FACTOR = 2.0  # slowdown ring radius, in reach radii
_DAMP_START = 0.75  # surface distance (in obstacle radii) where inward damping ramps in
_DAMP_FULL = 0.5  # ... and where it reaches full strength
_PUSH_BAND = 0.5  # surface band (in obstacle radii) with an outward push


@dataclass(frozen=True)
class SubpolicyAction:
    goal: int
    action: np.ndarray


def steer_to_point(
    gripper_pos: np.ndarray,
    obstacle_pos: np.ndarray,
    target: np.ndarray,
    config: EnvConfig,
) -> np.ndarray:
    """Velocity command toward an arbitrary target point, avoiding the obstacle."""
    to_target = target - gripper_pos
    dist = float(np.linalg.norm(to_target))
    if dist < 1e-12:
        return np.zeros(2)
    goal_dir = to_target / dist
    speed = config.max_speed * min(1.0, dist / (ARRIVAL_FACTOR * config.reach_radius))

    rel = gripper_pos - obstacle_pos
    center_dist = float(np.linalg.norm(rel))
    radius = config.obstacle_radius
    influence = INFLUENCE_FACTOR * radius
    if center_dist >= influence:
        return goal_dir * speed

    if center_dist > 1e-12:
        radial_out = rel / center_dist
    else:
        radial_out = np.array([1.0, 0.0])

    blend = float(np.clip((influence - center_dist) / (influence - radius), 0.0, 1.0))
    tangent = np.array([-radial_out[1], radial_out[0]])
    if float(np.dot(tangent, goal_dir)) < float(np.dot(-tangent, goal_dir)):
        tangent = -tangent

    surface = center_dist - radius
    # Damp the inward part of the attraction near the surface so the field
    # never points into the obstacle, and add an outward push inside the band.
    damp = float(np.clip((_DAMP_START * radius - surface) / ((_DAMP_START - _DAMP_FULL) * radius), 0.0, 1.0))
    inward = min(0.0, float(np.dot(goal_dir, radial_out)))
    attraction = goal_dir - damp * inward * radial_out
    push = float(np.clip(1.0 - surface / (_PUSH_BAND * radius), 0.0, 1.0))

    combined = (1.0 - blend) * attraction + blend * tangent + push * radial_out
    norm = float(np.linalg.norm(combined))
    direction = combined / norm if norm > 1e-12 else radial_out
    return direction * speed


def subpolicy_action(state: WorkspaceState, goal: int, config: EnvConfig) -> np.ndarray:
    """Velocity command of the sub-policy conditioned on goal index `goal`."""
    if not 0 <= goal < len(state.goal_positions):
        raise ValueError(f"goal index {goal} out of range")
    return steer_to_point(
        state.gripper_pos, state.obstacle_pos, state.goal_positions[goal], config
    )


def subpolicy_batch(state: WorkspaceState, config: EnvConfig) -> list[SubpolicyAction]:
    """All sub-policy actions, in goal-index order."""
    return [
        SubpolicyAction(goal=g, action=subpolicy_action(state, g, config))
        for g in range(len(state.goal_positions))
    ]


def action_matrix(sub_actions: list[SubpolicyAction]) -> np.ndarray:
    """Stack sub-policy actions into a (G, 2) array."""
    return np.stack([entry.action for entry in sub_actions])
