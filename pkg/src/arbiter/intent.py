"""Goal inference from the executed gripper trajectory.

Per-goal confidence scores are the posterior over goals given the path from
the start S to the current position U, using the quadratic-velocity effort
cost. The log-likelihood of goal g compares the cost spent so far plus the
optimal cost-to-go against the optimal start-to-goal cost, so a goal the
trajectory has been heading toward efficiently gets a high score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import EnvConfig, WorkspaceState

# Rationality sharpness applied to the log-likelihoods. With effort costs
# measured in m^2/s the raw spread across goals is only a few hundredths,
# so a plain softmax would stay near-uniform forever; this calibration puts
# a straight approach at a dominant (>0.9) score by the time the gripper
# nears the goal.
DEFAULT_BETA = 200.0
DEFAULT_SMOOTHING = 0.0


@dataclass
class TrajectoryHistory:
    """Positions and velocity commands observed since the episode start."""

    start: np.ndarray
    positions: list[np.ndarray] = field(default_factory=list)
    velocities: list[np.ndarray] = field(default_factory=list)
    effort_cost: float = 0.0  # sum of squared command speeds times dt

    @classmethod
    def begin(cls, state: WorkspaceState) -> "TrajectoryHistory":
        start = np.array(state.gripper_pos, dtype=float)
        return cls(start=start, positions=[start])

    def append(self, position: np.ndarray, velocity: np.ndarray, dt: float) -> None:
        self.positions.append(np.array(position, dtype=float))
        self.velocities.append(np.array(velocity, dtype=float))
        self.effort_cost += float(np.dot(velocity, velocity)) * dt


@dataclass(frozen=True)
class GoalBelief:
    scores: np.ndarray
    log_likelihoods: np.ndarray


def optimal_cost(a: np.ndarray, b: np.ndarray, config: EnvConfig) -> float:
    """Effort cost of the straight line a->b traversed at max speed.

    ||b - a||^2 / (T * dt) with T the straight-line step count at max speed,
    which reduces to max_speed * ||b - a||.
    """
    return config.max_speed * float(np.linalg.norm(np.asarray(b) - np.asarray(a)))


def normalized_scores(log_likelihoods: np.ndarray, beta: float) -> np.ndarray:
    """Softmax with a uniform prior, stabilized by subtracting the max."""
    scaled = beta * np.asarray(log_likelihoods, dtype=float)
    scaled = scaled - np.max(scaled)
    weights = np.exp(scaled)
    return weights / np.sum(weights)


def update_belief(
    history: TrajectoryHistory,
    state: WorkspaceState,
    config: EnvConfig,
    beta: float = DEFAULT_BETA,
    smoothing: float = DEFAULT_SMOOTHING,
    previous: GoalBelief | None = None,
) -> GoalBelief:
    if not history.positions:
        raise ValueError("history must contain at least the start position")
    current = state.gripper_pos
    start = history.start
    goals = state.goal_positions

    log_likelihoods = np.empty(len(goals))
    for g, goal in enumerate(goals):
        cost_so_far = history.effort_cost + optimal_cost(current, goal, config)
        log_likelihoods[g] = optimal_cost(start, goal, config) - cost_so_far

    scores = normalized_scores(log_likelihoods, beta)
    if smoothing > 0.0 and previous is not None:
        scores = (1.0 - smoothing) * scores + smoothing * previous.scores
        scores = scores / np.sum(scores)
    return GoalBelief(scores=scores, log_likelihoods=log_likelihoods)


def predicted_goal(belief: GoalBelief) -> int:
    """Index of the maximal score; ties go to the lowest index."""
    return int(np.argmax(belief.scores))
