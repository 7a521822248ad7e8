"""Simulated human controllers used during training and evaluation.

Noisy follows the true goal's sub-policy with per-component Gaussian noise,
Straight aims directly at the goal with no obstacle avoidance, and Biased
follows the sub-policy field toward a misperceived goal position (a fixed
per-episode offset).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, WorkspaceState, clamp_speed
from .subpolicies import steer_to_point, subpolicy_action

DEFAULT_BIAS_OFFSET_SCALE = 0.12

# Per-episode rotation used by the "mixed" training population.
MIXED_CYCLE = ("straight", "noisy0.5", "noisy1.0", "biased")

_NOISY_SPEC = re.compile(r"^noisy(\d+(?:\.\d+)?)$")


@dataclass
class UserModel:
    mode: str  # "noisy" | "straight" | "biased"
    true_goal: int
    rng: np.random.Generator
    sigma: float = 0.0  # noise std as a fraction of max_speed (noisy)
    offset: np.ndarray | None = None  # misperception offset (biased)


def sample_user(
    mode_spec: str,
    true_goal: int,
    seed: int,
    config: EnvConfig,
    bias_offset_scale: float = DEFAULT_BIAS_OFFSET_SCALE,
) -> UserModel:
    """Build a user for one episode; deterministic given the seed.

    Accepted specs: "straight", "biased", and "noisyX.Y" (e.g. "noisy0.5",
    "noisy1.0") where the suffix is the noise std in units of max_speed.
    """
    rng = np.random.default_rng(seed)
    if mode_spec == "straight":
        return UserModel(mode="straight", true_goal=true_goal, rng=rng)
    if mode_spec == "biased":
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius = bias_offset_scale * config.workspace_side * np.sqrt(rng.uniform())
        offset = radius * np.array([np.cos(angle), np.sin(angle)])
        return UserModel(mode="biased", true_goal=true_goal, rng=rng, offset=offset)
    match = _NOISY_SPEC.match(mode_spec)
    if match:
        sigma = float(match.group(1))
        if sigma <= 0:
            raise ValueError("noisy user needs a positive noise scale")
        return UserModel(mode="noisy", true_goal=true_goal, rng=rng, sigma=sigma)
    raise ValueError(f"unknown user mode {mode_spec!r}")


def user_action(model: UserModel, state: WorkspaceState, config: EnvConfig) -> np.ndarray:
    if model.mode == "straight":
        to_goal = state.goal_positions[model.true_goal] - state.gripper_pos
        dist = float(np.linalg.norm(to_goal))
        if dist < 1e-12:
            return np.zeros(2)
        return to_goal / dist * config.max_speed
    if model.mode == "noisy":
        base = subpolicy_action(state, model.true_goal, config)
        noise = model.rng.normal(0.0, model.sigma * config.max_speed, size=2)
        return clamp_speed(base + noise, config.max_speed)
    if model.mode == "biased":
        target = state.goal_positions[model.true_goal] + model.offset
        return steer_to_point(state.gripper_pos, state.obstacle_pos, target, config)
    raise ValueError(f"unknown user mode {model.mode!r}")
