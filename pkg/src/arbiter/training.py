"""Rollout engine and the arbitration training loop.

`step_pipeline` is the single per-tick computation (sub-policies, belief,
observation, modality, arbitrated action) shared by training, evaluation,
tracing, and the live teleop service, which keeps offline replays bit-exact
against served sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import env
from .agent import (
    AgentHyperparams,
    ArbitrationAgent,
    EpisodeBuffer,
    ReplayBuffer,
    Transition,
    hindsight_label,
)
from .circular import Modality
from .config import RunConfig
from .env import EnvConfig, WorkspaceState, clamp_speed
from .intent import GoalBelief, TrajectoryHistory, predicted_goal, update_belief
from .observation import ArbitrationObservation, assemble_observation
from .rewards import modality_of_observation
from .subpolicies import SubpolicyAction, subpolicy_batch
from .users import MIXED_CYCLE, UserModel, sample_user, user_action


@dataclass(frozen=True)
class PipelineStep:
    sub_actions: list[SubpolicyAction]
    belief: GoalBelief
    obs: ArbitrationObservation
    modality: Modality
    user_command: np.ndarray
    arbitrated: np.ndarray


def step_pipeline(
    state: WorkspaceState,
    history: TrajectoryHistory,
    user_command: np.ndarray,
    agent: ArbitrationAgent | None,
    config: RunConfig,
    *,
    assistance: str = "shared",
    noise_rng: np.random.Generator | None = None,
    noise_sigma: float = 0.0,
) -> PipelineStep:
    """Everything that happens between observing the user and moving."""
    user_command = clamp_speed(user_command, config.env.max_speed)
    subs = subpolicy_batch(state, config.env)
    belief = update_belief(
        history, state, config.env, beta=config.intent.beta, smoothing=config.intent.smoothing
    )
    obs = assemble_observation(state, user_command, subs, belief, config.env)
    modality = modality_of_observation(obs, config.reward)
    if assistance == "direct" or agent is None:
        arbitrated = user_command
    elif noise_sigma > 0.0 and noise_rng is not None:
        arbitrated = agent.select_action(obs, noise_rng, noise_sigma)
    else:
        arbitrated = agent.actor_forward(obs)
    return PipelineStep(
        sub_actions=subs,
        belief=belief,
        obs=obs,
        modality=modality,
        user_command=user_command,
        arbitrated=arbitrated,
    )


@dataclass
class EpisodeRecord:
    env_seed: int
    true_goal: int
    success: bool
    goal_reached: int | None
    steps: int
    travel_cm: float
    collision_steps: int
    boundary_steps: int
    episode_return: float | None
    mean_l2_user: float
    mean_l2_predicted: float
    step_rows: list[dict] = field(default_factory=list)


def _noise_sigma(hyper: AgentHyperparams, episode: int, total: int, max_speed: float) -> float:
    """Linear decay across the first half of training, then flat."""
    horizon = max(1, total // 2)
    frac = min(1.0, episode / horizon)
    sigma = hyper.noise_sigma_start + frac * (hyper.noise_sigma_end - hyper.noise_sigma_start)
    return sigma * max_speed


@dataclass
class TrainingArtifacts:
    metrics: list[dict]
    agent: ArbitrationAgent
    replay: ReplayBuffer


def run_training(
    config: RunConfig, agent: ArbitrationAgent, seed: int
) -> TrainingArtifacts:
    """Arbitration training: roll episodes, label them in hindsight once the
    true goal is revealed, and update from replay after the warmup episodes.
    A pure function of (config, agent initialization, seed).
    """
    root = np.random.SeedSequence(seed)
    env_seeds, user_seeds, noise_seq, replay_seq = root.spawn(4)
    env_rng = np.random.default_rng(env_seeds)
    user_rng = np.random.default_rng(user_seeds)
    noise_rng = np.random.default_rng(noise_seq)
    replay_rng = np.random.default_rng(replay_seq)

    hyper = agent.hyper
    replay = ReplayBuffer(hyper.replay_capacity)
    episode_buffer = EpisodeBuffer()
    metrics: list[dict] = []
    episodes = config.run.episodes

    for episode_index in range(episodes):
        env_seed = int(env_rng.integers(2**63))
        state = env.reset(config.env, env_seed)
        true_goal = int(user_rng.integers(config.env.goal_count))
        mode = config.user.mode
        if mode == "mixed":
            mode = MIXED_CYCLE[episode_index % len(MIXED_CYCLE)]
        user = sample_user(
            mode,
            true_goal,
            int(user_rng.integers(2**63)),
            config.env,
            bias_offset_scale=config.user.bias_offset_scale,
        )
        history = TrajectoryHistory.begin(state)
        sigma = _noise_sigma(hyper, episode_index, episodes, config.env.max_speed)
        training_active = episode_index >= hyper.warmup_episodes

        positions = [state.gripper_pos.copy()]
        collision_steps = 0
        boundary_steps = 0
        l2_user: list[float] = []
        l2_pred: list[float] = []
        goal_reached: int | None = None

        while True:
            command = user_action(user, state, config.env)
            pipe = step_pipeline(
                state,
                history,
                command,
                agent,
                config,
                noise_rng=noise_rng,
                noise_sigma=sigma,
            )
            next_state, events = env.step(state, pipe.arbitrated, config.env)
            history.append(next_state.gripper_pos, next_state.gripper_vel, config.env.dt)

            next_subs = subpolicy_batch(next_state, config.env)
            next_belief = update_belief(
                history, next_state, config.env,
                beta=config.intent.beta, smoothing=config.intent.smoothing,
            )
            next_command = clamp_speed(
                user_action(user, next_state, config.env), config.env.max_speed
            )
            next_obs = assemble_observation(
                next_state, next_command, next_subs, next_belief, config.env
            )
            episode_buffer.add(
                Transition(
                    obs=pipe.obs,
                    action=pipe.arbitrated,
                    next_obs=next_obs,
                    done=events.terminated,
                    events=events,
                )
            )

            positions.append(next_state.gripper_pos.copy())
            collision_steps += int(events.obstacle_collision)
            boundary_steps += int(events.boundary_contact)
            best = predicted_goal(pipe.belief)
            l2_user.append(float(np.linalg.norm(pipe.user_command - pipe.arbitrated)))
            l2_pred.append(
                float(np.linalg.norm(pipe.sub_actions[best].action - pipe.arbitrated))
            )

            if training_active and len(replay) >= hyper.batch_size:
                agent.train_step(replay.sample(replay_rng, hyper.batch_size))

            state = next_state
            if events.terminated:
                goal_reached = events.goal_reached
                break

        labeled = hindsight_label(episode_buffer, true_goal, config.reward)
        for transition in labeled:
            replay.push(transition)

        travel = float(
            sum(np.linalg.norm(b - a) for a, b in zip(positions[:-1], positions[1:]))
        )
        row = {
            "episode": episode_index,
            "env_seed": env_seed,
            "true_goal": true_goal,
            "goal_reached": goal_reached,
            "success": bool(goal_reached == true_goal),
            "steps": len(positions) - 1,
            "return": float(sum(t.reward for t in labeled)),
            "collisions": collision_steps,
            "boundary_steps": boundary_steps,
            "travel_cm": travel * 100.0,
            "mean_l2_user": float(np.mean(l2_user)),
            "mean_l2_predicted": float(np.mean(l2_pred)),
            "noise_sigma": sigma,
        }
        metrics.append(row)

    _append_moving_averages(metrics, window=10)
    return TrainingArtifacts(metrics=metrics, agent=agent, replay=replay)


def _append_moving_averages(metrics: list[dict], window: int) -> None:
    returns = [m["return"] for m in metrics]
    successes = [1.0 if m["success"] else 0.0 for m in metrics]
    for i, row in enumerate(metrics):
        lo = max(0, i - window + 1)
        row["return_ma10"] = float(np.mean(returns[lo : i + 1]))
        row["success_ma10"] = float(np.mean(successes[lo : i + 1]))


def episode_seed(base_seed: int, episode_index: int, stream: int = 0) -> int:
    """Stable per-episode seed shared across assistance arms for pairing."""
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(stream, episode_index))
    return int(seq.generate_state(1, dtype=np.uint64)[0] % (2**63))


def rollout_episode(
    config: RunConfig,
    agent: ArbitrationAgent | None,
    user: UserModel,
    env_seed: int,
    *,
    assistance: str = "shared",
    record_steps: bool = False,
) -> EpisodeRecord:
    """One evaluation rollout without exploration noise or training."""
    state = env.reset(config.env, env_seed)
    history = TrajectoryHistory.begin(state)
    positions = [state.gripper_pos.copy()]
    collision_steps = 0
    boundary_steps = 0
    l2_user: list[float] = []
    l2_pred: list[float] = []
    step_rows: list[dict] = []
    goal_reached: int | None = None

    while True:
        command = user_action(user, state, config.env)
        pipe = step_pipeline(state, history, command, agent, config, assistance=assistance)
        next_state, events = env.step(state, pipe.arbitrated, config.env)
        history.append(next_state.gripper_pos, next_state.gripper_vel, config.env.dt)

        best = predicted_goal(pipe.belief)
        du = float(np.linalg.norm(pipe.user_command - pipe.arbitrated))
        dp = float(np.linalg.norm(pipe.sub_actions[best].action - pipe.arbitrated))
        l2_user.append(du)
        l2_pred.append(dp)
        collision_steps += int(events.obstacle_collision)
        boundary_steps += int(events.boundary_contact)
        positions.append(next_state.gripper_pos.copy())
        if record_steps:
            _, obstacle_dist = env.distances(state, config.env)
            step_rows.append(
                {
                    "step": state.step_index,
                    "l2_user": du,
                    "l2_predicted": dp,
                    "modality": pipe.modality.label,
                    "scores": [float(s) for s in pipe.belief.scores],
                    "obstacle_dist": obstacle_dist,
                }
            )

        state = next_state
        if events.terminated:
            goal_reached = events.goal_reached
            break

    steps = len(positions) - 1
    if record_steps:
        for row in step_rows:
            row["t_norm"] = row.pop("step") / steps
    travel = float(sum(np.linalg.norm(b - a) for a, b in zip(positions[:-1], positions[1:])))
    return EpisodeRecord(
        env_seed=env_seed,
        true_goal=user.true_goal,
        success=bool(goal_reached == user.true_goal),
        goal_reached=goal_reached,
        steps=steps,
        travel_cm=travel * 100.0,
        collision_steps=collision_steps,
        boundary_steps=boundary_steps,
        episode_return=None,
        mean_l2_user=float(np.mean(l2_user)),
        mean_l2_predicted=float(np.mean(l2_pred)),
        step_rows=step_rows,
    )


def evaluation_episode(
    config: RunConfig,
    agent: ArbitrationAgent | None,
    episode_index: int,
    *,
    assistance: str,
    user_mode: str | None = None,
    record_steps: bool = False,
) -> EpisodeRecord:
    """Matched-seed evaluation episode: the scene and the user draw depend
    only on (run seed, episode index), never on the assistance arm."""
    base = config.run.seed
    scene_seed = episode_seed(base, episode_index, stream=0)
    user_seed = episode_seed(base, episode_index, stream=1)
    goal_rng = np.random.default_rng(episode_seed(base, episode_index, stream=2))
    true_goal = int(goal_rng.integers(config.env.goal_count))
    user = sample_user(
        user_mode or config.user.mode,
        true_goal,
        user_seed,
        config.env,
        bias_offset_scale=config.user.bias_offset_scale,
    )
    return rollout_episode(
        config, agent, user, scene_seed, assistance=assistance, record_steps=record_steps
    )
