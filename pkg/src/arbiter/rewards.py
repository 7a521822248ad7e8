"""Training reward: environment events plus modality-gated agreement.

The agreement term penalizes disagreement between the arbitrated action and
a reference that depends on whether the sub-policy mixture is multimodal
(a decision point: match the human) or unimodal (match the true goal's
sub-policy), plus a speed-matching term against the human command. The
environment term applies -10 per collision step, -2 per boundary-contact
step, and +10 for reaching the intended goal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import circular
from .circular import Modality, build_fvmm, classify_modality
from .env import EnvEvents
from .observation import ArbitrationObservation

COLLISION_PENALTY = -10.0
BOUNDARY_PENALTY = -2.0
GOAL_BONUS = 10.0


@dataclass(frozen=True)
class RewardParams:
    mode: str = "combined"  # "combined" or "env_only"
    kappa_min: float = circular.KAPPA_MIN
    kappa_scale: float = circular.KAPPA_SCALE
    peak_threshold: float = circular.PEAK_THRESHOLD
    modality_samples: int = circular.MODALITY_SAMPLES

    def __post_init__(self) -> None:
        if self.mode not in ("combined", "env_only"):
            raise ValueError("reward mode must be 'combined' or 'env_only'")


@dataclass(frozen=True)
class RewardBreakdown:
    r_env: float
    r_agree: float
    r_speed: float
    total: float
    modality: Modality


def env_reward(events: EnvEvents, true_goal: int) -> float:
    """Event penalties and the terminal bonus for reaching the intended goal."""
    reward = 0.0
    if events.obstacle_collision:
        reward += COLLISION_PENALTY
    if events.boundary_contact:
        reward += BOUNDARY_PENALTY
    if events.goal_reached is not None and events.goal_reached == true_goal:
        reward += GOAL_BONUS
    return reward


def unit_or_zero(action: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(action))
    if norm == 0.0:
        return np.zeros(2)
    return np.asarray(action, dtype=float) / norm


def agreement_reward(
    a_h: np.ndarray,
    a_s: np.ndarray,
    a_r_star: np.ndarray,
    multimodal: bool,
) -> tuple[float, float]:
    """(r_agree, r_speed): direction mismatch against the branch reference,
    plus the speed-matching term folded into r_agree.
    """
    reference = unit_or_zero(a_h) if multimodal else unit_or_zero(a_r_star)
    mismatch = reference - unit_or_zero(a_s)
    base = -float(np.dot(mismatch, mismatch))
    r_speed = -abs(float(np.linalg.norm(a_h)) - float(np.linalg.norm(a_s)))
    return base + r_speed, r_speed


def modality_of_observation(obs: ArbitrationObservation, params: RewardParams) -> Modality:
    mixture = build_fvmm(
        obs.sub_actions, obs.scores, kappa_min=params.kappa_min, kappa_scale=params.kappa_scale
    )
    return classify_modality(
        mixture, n_samples=params.modality_samples, peak_threshold=params.peak_threshold
    )


def compute_reward(
    obs: ArbitrationObservation,
    a_s: np.ndarray,
    events: EnvEvents,
    true_goal: int,
    params: RewardParams | None = None,
) -> RewardBreakdown:
    """Reward for one stored transition, labeled in hindsight with the true goal.

    Modality comes from the observation as it was at execution time; in
    env_only mode the agreement terms are dropped entirely.
    """
    params = params or RewardParams()
    modality = modality_of_observation(obs, params)
    r_env_value = env_reward(events, true_goal)
    if params.mode == "env_only":
        return RewardBreakdown(
            r_env=r_env_value, r_agree=0.0, r_speed=0.0, total=r_env_value, modality=modality
        )
    r_agree, r_speed = agreement_reward(
        obs.user_action,
        np.asarray(a_s, dtype=float),
        obs.sub_actions[true_goal],
        modality.multimodal,
    )
    return RewardBreakdown(
        r_env=r_env_value,
        r_agree=r_agree,
        r_speed=r_speed,
        total=r_env_value + r_agree,
        modality=modality,
    )
