"""Supervised pretraining of the arbitration networks.

Stage 1 trains the head to regress the sub-policy action with the highest
goal score from states collected along simulated rollouts. At decision
points that target is ill-defined, so the head instead regresses the
score-weighted mean of the sub-policy actions there: divergent directions
nearly cancel, which leaves the mixture's modality legible in the head
output's magnitude. Stage 2 freezes the head and trains the actor tail to
reproduce the highest-score sub-policy action despite a randomized
user-action input, so the freshly initialized agent hands full control to
the robot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import env, nets
from .agent import AgentHyperparams, ArbitrationAgent
from .errors import PretrainingError
from .intent import DEFAULT_BETA, TrajectoryHistory, predicted_goal, update_belief
from .nets import DenseNetwork
from .observation import assemble_observation
from .rewards import RewardParams, modality_of_observation
from .subpolicies import subpolicy_batch
from .users import sample_user, user_action

_TANH_CLIP = 0.999


@dataclass(frozen=True)
class PretrainParams:
    samples: int = 50_000
    val_fraction: float = 0.1
    blend_band: float = 0.15  # peak-density band over which targets blend to argmax
    batch_size: int = 256
    stage1_lr: float = 2e-3
    stage2_lr: float = 2e-3
    stage1_epochs: int = 900
    stage2_link_epochs: int = 150
    stage2_tune_epochs: int = 500
    tolerance: float = 0.01  # mean L2 bar for both stages, as a fraction of max_speed


def collect_dataset(
    config: env.EnvConfig,
    n_samples: int,
    rng: np.random.Generator,
    blend_band: float = 0.15,
    beta: float = DEFAULT_BETA,
    reward_params: RewardParams | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(core observations, targets, unambiguous mask) gathered from rollouts.

    Episodes alternate between a straight user, a noisy user, and the
    highest-score sub-policy itself as the executed command, for coverage of
    both compliant and assisted trajectories.

    Targets follow the same modality rule the reward uses. Where the score
    mixture is solidly unimodal (peak density at least `blend_band` above the
    threshold) the target is the highest-score sub-policy action (mask True).
    At decision points that target is ill-defined, so the completion is the
    score-weighted mean of the sub-policy actions, whose near-cancellation
    makes decision points legible downstream; across the band the two blend
    linearly (mask False). Validation bars are measured on the True subset.
    """
    reward_params = reward_params or RewardParams()
    cores: list[np.ndarray] = []
    targets: list[np.ndarray] = []
    clean: list[bool] = []
    episode = 0
    drivers = ("straight", "noisy0.5", "argmax")
    while len(cores) < n_samples:
        seed = int(rng.integers(2**63))
        state = env.reset(config, seed)
        true_goal = int(rng.integers(config.goal_count))
        driver = drivers[episode % len(drivers)]
        episode += 1
        user = None
        if driver != "argmax":
            user = sample_user(driver, true_goal, int(rng.integers(2**63)), config)
        history = TrajectoryHistory.begin(state)
        for _ in range(config.max_steps):
            subs = subpolicy_batch(state, config)
            belief = update_belief(history, state, config, beta=beta)
            obs = assemble_observation(state, np.zeros(2), subs, belief, config)
            best = predicted_goal(belief)
            cores.append(obs.core.copy())
            peak = modality_of_observation(obs, reward_params).peak_density
            blend = np.clip(
                (peak - reward_params.peak_threshold) / blend_band, 0.0, 1.0
            )
            if blend >= 1.0:
                targets.append(subs[best].action.copy())
                clean.append(True)
            else:
                mean_action = belief.scores @ np.stack([s.action for s in subs])
                targets.append(blend * subs[best].action + (1.0 - blend) * mean_action)
                clean.append(False)
            if len(cores) >= n_samples:
                break
            if user is not None:
                command = user_action(user, state, config)
            else:
                command = subs[best].action
            state, events = env.step(state, command, config)
            history.append(state.gripper_pos, state.gripper_vel, config.dt)
            if events.terminated:
                break
    return np.stack(cores), np.stack(targets), np.array(clean, dtype=bool)


def _mean_l2(predicted: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean(np.linalg.norm(predicted - target, axis=1)))


def _fit_regression(
    net: DenseNetwork,
    inputs: np.ndarray,
    targets: np.ndarray,
    val_inputs: np.ndarray,
    val_targets: np.ndarray,
    lr: float,
    batch_size: int,
    epochs: int,
    rng: np.random.Generator,
    stop_below: float,
    sample_weights: np.ndarray | None = None,
) -> float:
    """Minibatch Adam on (weighted) MSE with a two-step LR decay; returns the
    validation mean L2."""
    opt = nets.adam_init(net, lr)
    n = len(inputs)
    for epoch in range(epochs):
        if epoch == int(epochs * 0.6):
            opt.lr = lr * 0.3
        elif epoch == int(epochs * 0.85):
            opt.lr = lr * 0.1
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            x = inputs[idx]
            pred = nets.forward(net, x)
            upstream = (2.0 / len(idx)) * (pred - targets[idx])
            if sample_weights is not None:
                upstream = upstream * sample_weights[idx][:, None]
            grads = nets.backward(net, x, upstream)
            nets.adam_step(net, grads, opt)
        val = _mean_l2(nets.forward(net, val_inputs), val_targets)
        if val < stop_below:
            break
    return _mean_l2(nets.forward(net, val_inputs), val_targets)


def pretrain_agent(
    config: env.EnvConfig,
    hyper: AgentHyperparams,
    params: PretrainParams,
    seed: int,
    beta: float = DEFAULT_BETA,
    reward_params: RewardParams | None = None,
) -> tuple[ArbitrationAgent, dict]:
    """Run both stages and return a fresh agent with a frozen head, plus a
    validation report. Raises PretrainingError if a stage misses its bar.
    """
    rng = np.random.default_rng(seed)
    cores, targets, clean = collect_dataset(
        config, params.samples, rng, params.blend_band, beta, reward_params
    )
    n_val = max(1, int(len(cores) * params.val_fraction))
    order = rng.permutation(len(cores))
    val_idx, train_idx = order[:n_val], order[n_val:]
    # the regression bar is measured where the argmax target is well-defined;
    # the tail is trained there too, since its contract is the argmax behavior
    val_clean = val_idx[clean[val_idx]]
    train_clean = train_idx[clean[train_idx]]
    bar = params.tolerance * config.max_speed

    agent = ArbitrationAgent.build(config.goal_count, config.max_speed, hyper, rng)

    # the decision-point completions only need qualitative fidelity, so they
    # carry less loss weight than the argmax targets the bar is measured on
    weights = np.where(clean, 1.0, 0.3)
    stage1_val = _fit_regression(
        agent.head,
        cores[train_idx],
        targets[train_idx],
        cores[val_clean],
        targets[val_clean],
        params.stage1_lr,
        params.batch_size,
        params.stage1_epochs,
        rng,
        stop_below=0.35 * bar,
        sample_weights=weights[train_idx],
    )
    if stage1_val >= bar:
        raise PretrainingError(
            f"head regression reached {stage1_val:.5f}, needs < {bar:.5f}"
        )
    for layer in agent.head.layers:
        layer.frozen = True

    # Stage 2, phase one: regress pre-activation targets through the atanh
    # link so the tanh output can reach near-saturated components. The
    # user-action input is randomized so the tail learns to ignore it.
    head_out = nets.forward(agent.head, cores)
    user_random = _random_user_actions(rng, len(cores), config.max_speed)
    tail_inputs = np.hstack([head_out, user_random])
    scaled = np.clip(targets / config.max_speed, -_TANH_CLIP, _TANH_CLIP)
    z_targets = np.arctanh(scaled)

    link_view = DenseNetwork(list(agent.actor_tail.layers))
    last = agent.actor_tail.layers[-1]
    link_view.layers[-1] = nets.DenseLayer(
        last.weights, last.biases, activation="identity", frozen=last.frozen
    )
    _fit_regression(
        link_view,
        tail_inputs[train_clean],
        z_targets[train_clean],
        tail_inputs[val_clean],
        z_targets[val_clean],
        params.stage2_lr,
        params.batch_size,
        params.stage2_link_epochs,
        rng,
        stop_below=0.0,  # action-space validation decides below
    )

    # Phase two: fine-tune through the real tanh on normalized actions, which
    # weights errors the way the validation metric does.
    _fit_regression(
        agent.actor_tail,
        tail_inputs[train_clean],
        targets[train_clean] / config.max_speed,
        tail_inputs[val_clean],
        targets[val_clean] / config.max_speed,
        0.5 * params.stage2_lr,
        params.batch_size,
        params.stage2_tune_epochs,
        rng,
        stop_below=0.5 * params.tolerance,
    )

    fresh_user = _random_user_actions(rng, len(val_clean), config.max_speed)
    val_actions = config.max_speed * nets.forward(
        agent.actor_tail, np.hstack([head_out[val_clean], fresh_user])
    )
    stage2_val = _mean_l2(val_actions, targets[val_clean])
    if stage2_val >= bar:
        raise PretrainingError(
            f"actor regression reached {stage2_val:.5f}, needs < {bar:.5f}"
        )

    agent.target_actor_tail = agent.actor_tail.copy()
    agent.target_critic_tail = agent.critic_tail.copy()

    probe = _user_sensitivity(agent, cores[val_idx][:200], rng)
    report = {
        "samples": int(len(cores)),
        "stage1_val_l2": stage1_val,
        "stage2_val_l2": stage2_val,
        "tolerance": bar,
        "user_sensitivity_var": probe,
    }
    return agent, report


def _random_user_actions(rng: np.random.Generator, n: int, max_speed: float) -> np.ndarray:
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radii = max_speed * np.sqrt(rng.uniform(size=n))
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


def _user_sensitivity(
    agent: ArbitrationAgent, cores: np.ndarray, rng: np.random.Generator, draws: int = 32
) -> float:
    """Mean per-state output variance under randomized user actions."""
    head_out = nets.forward(agent.head, cores)
    outputs = []
    for _ in range(draws):
        user = _random_user_actions(rng, len(cores), agent.max_speed)
        outputs.append(
            agent.max_speed * nets.forward(agent.actor_tail, np.hstack([head_out, user]))
        )
    stacked = np.stack(outputs)  # (draws, n, 2)
    return float(np.mean(stacked.var(axis=0)))
