"""Observation vector fed to the arbitration actor and critic.

Layout for G goals (17 entries when G = 3):

    user action (2) | sub-policy actions flattened (2G) | scores (G) |
    per-goal distances (G) | gripper position (2) | obstacle surface distance (1)

Positions and distances are normalized by the workspace side; actions and
scores enter raw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, WorkspaceState, distances
from .intent import GoalBelief
from .subpolicies import SubpolicyAction, action_matrix


def observation_dim(goal_count: int) -> int:
    return 4 * goal_count + 5


@dataclass(frozen=True)
class ArbitrationObservation:
    vec: np.ndarray
    goal_count: int

    def __post_init__(self) -> None:
        expected = observation_dim(self.goal_count)
        if self.vec.shape != (expected,):
            raise ValueError(f"observation must have {expected} entries")
        if not np.all(np.isfinite(self.vec)):
            raise ValueError("observation entries must be finite")

    @property
    def user_action(self) -> np.ndarray:
        return self.vec[:2]

    @property
    def sub_actions(self) -> np.ndarray:
        g = self.goal_count
        return self.vec[2 : 2 + 2 * g].reshape(g, 2)

    @property
    def scores(self) -> np.ndarray:
        g = self.goal_count
        return self.vec[2 + 2 * g : 2 + 3 * g]

    @property
    def goal_distances(self) -> np.ndarray:
        g = self.goal_count
        return self.vec[2 + 3 * g : 2 + 4 * g]

    @property
    def gripper_position(self) -> np.ndarray:
        g = self.goal_count
        return self.vec[2 + 4 * g : 4 + 4 * g]

    @property
    def obstacle_distance(self) -> float:
        return float(self.vec[-1])

    @property
    def core(self) -> np.ndarray:
        """Everything except the user action: the shared head's input."""
        return self.vec[2:]


def assemble_observation(
    state: WorkspaceState,
    user_action: np.ndarray,
    sub_actions: list[SubpolicyAction],
    belief: GoalBelief,
    config: EnvConfig,
) -> ArbitrationObservation:
    goal_count = len(state.goal_positions)
    if len(sub_actions) != goal_count or len(belief.scores) != goal_count:
        raise ValueError("sub-policy actions and scores must match the goal count")
    user_action = np.asarray(user_action, dtype=float)
    if user_action.shape != (2,):
        raise ValueError("user action must be 2D")

    goal_dists, obstacle_dist = distances(state, config)
    side = config.workspace_side
    vec = np.concatenate(
        [
            user_action,
            action_matrix(sub_actions).reshape(-1),
            belief.scores,
            goal_dists / side,
            state.gripper_pos / side,
            [obstacle_dist / side],
        ]
    )
    return ArbitrationObservation(vec=vec, goal_count=goal_count)
