"""Arbitration agent: frozen shared head, actor/critic tails, replay machinery.

The head consumes the observation minus the user action and emits a
two-value robot-action prediction. The actor tail maps (head output, user
action) through three 16-unit layers to a tanh action scaled by max_speed;
the critic tail maps (head output, user action, arbitrated action) through
two 128-unit layers to a scalar value. Episodes are buffered unlabeled and
rewards are filled in hindsight once the true goal is known.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import nets
from .env import EnvEvents, clamp_speed
from .nets import AdamState, DenseNetwork
from .observation import ArbitrationObservation, observation_dim
from .rewards import RewardParams, compute_reward


@dataclass(frozen=True)
class AgentHyperparams:
    gamma: float = 0.95
    tau: float = 0.005
    lr_actor: float = 3e-4  # 1e-4 converges too slowly for 300-episode runs
    lr_critic: float = 1e-3
    batch_size: int = 64
    replay_capacity: int = 100_000
    warmup_episodes: int = 10
    noise_sigma_start: float = 0.3  # fraction of max_speed
    noise_sigma_end: float = 0.05
    head_width: int = 32
    actor_width: int = 16
    critic_width: int = 128


@dataclass
class Transition:
    obs: ArbitrationObservation
    action: np.ndarray
    next_obs: ArbitrationObservation
    done: bool
    events: EnvEvents
    reward: float | None = None
    true_goal: int | None = None

    @property
    def labeled(self) -> bool:
        return self.reward is not None


class EpisodeBuffer:
    """Unlabeled transitions of the in-flight episode."""

    def __init__(self) -> None:
        self.transitions: list[Transition] = []

    def add(self, transition: Transition) -> None:
        self.transitions.append(transition)

    def clear(self) -> None:
        self.transitions = []

    def __len__(self) -> int:
        return len(self.transitions)


class ReplayBuffer:
    """Ring buffer of labeled transitions; oldest evicted first."""

    def __init__(self, capacity: int) -> None:
        self.buffer: deque[Transition] = deque(maxlen=capacity)

    def push(self, transition: Transition) -> None:
        if not transition.labeled:
            raise ValueError("replay buffer only accepts labeled transitions")
        self.buffer.append(transition)

    def sample(self, rng: np.random.Generator, n: int) -> list[Transition]:
        indices = rng.integers(0, len(self.buffer), size=n)
        return [self.buffer[int(i)] for i in indices]

    def __len__(self) -> int:
        return len(self.buffer)


class ArbitrationAgent:
    def __init__(
        self,
        head: DenseNetwork,
        actor_tail: DenseNetwork,
        critic_tail: DenseNetwork,
        target_actor_tail: DenseNetwork,
        target_critic_tail: DenseNetwork,
        hyper: AgentHyperparams,
        goal_count: int,
        max_speed: float,
    ) -> None:
        self.head = head
        self.actor_tail = actor_tail
        self.critic_tail = critic_tail
        self.target_actor_tail = target_actor_tail
        self.target_critic_tail = target_critic_tail
        self.hyper = hyper
        self.goal_count = goal_count
        self.max_speed = max_speed
        self.actor_opt: AdamState = nets.adam_init(actor_tail, hyper.lr_actor)
        self.critic_opt: AdamState = nets.adam_init(critic_tail, hyper.lr_critic)

    @classmethod
    def build(
        cls,
        goal_count: int,
        max_speed: float,
        hyper: AgentHyperparams,
        rng: np.random.Generator,
    ) -> "ArbitrationAgent":
        core_dim = observation_dim(goal_count) - 2
        w = hyper.head_width
        head = nets.build_network(
            [core_dim, w, w, w, 2], ["relu", "relu", "relu", "identity"], rng
        )
        a = hyper.actor_width
        actor_tail = nets.build_network(
            [4, a, a, a, 2], ["relu", "relu", "relu", "tanh"], rng, final_init_scale=3e-3
        )
        c = hyper.critic_width
        critic_tail = nets.build_network(
            [6, c, c, 1], ["relu", "relu", "identity"], rng, final_init_scale=3e-3
        )
        return cls(
            head=head,
            actor_tail=actor_tail,
            critic_tail=critic_tail,
            target_actor_tail=actor_tail.copy(),
            target_critic_tail=critic_tail.copy(),
            hyper=hyper,
            goal_count=goal_count,
            max_speed=max_speed,
        )

    # -- forward passes -----------------------------------------------------

    def head_forward(self, core: np.ndarray) -> np.ndarray:
        return nets.forward(self.head, core)

    def actor_forward(self, obs: ArbitrationObservation) -> np.ndarray:
        # tanh bounds each component; the norm clamp keeps the emitted
        # command environment-feasible on the diagonal
        head_out = self.head_forward(obs.core)
        tail_in = np.concatenate([head_out, obs.user_action])
        return clamp_speed(
            self.max_speed * nets.forward(self.actor_tail, tail_in), self.max_speed
        )

    def actor_forward_batch(self, obs_mat: np.ndarray, tail: DenseNetwork | None = None) -> np.ndarray:
        tail = tail or self.actor_tail
        head_out = nets.forward(self.head, obs_mat[:, 2:])
        tail_in = np.hstack([head_out, obs_mat[:, :2]])
        actions = self.max_speed * nets.forward(tail, tail_in)
        speeds = np.linalg.norm(actions, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.max_speed / np.maximum(speeds, 1e-12))
        return actions * scale

    def select_action(
        self, obs: ArbitrationObservation, rng: np.random.Generator, sigma: float
    ) -> np.ndarray:
        """Deterministic action plus Gaussian exploration noise (std `sigma`,
        in speed units), norm-clamped to max_speed."""
        action = self.actor_forward(obs)
        if sigma > 0.0:
            action = action + rng.normal(0.0, sigma, size=2)
        return clamp_speed(action, self.max_speed)

    def critic_forward(self, obs: ArbitrationObservation, action: np.ndarray) -> float:
        head_out = self.head_forward(obs.core)
        tail_in = np.concatenate([head_out, obs.user_action, np.asarray(action, dtype=float)])
        return float(nets.forward(self.critic_tail, tail_in)[0])

    # -- training -----------------------------------------------------------

    def critic_targets(
        self,
        rewards: np.ndarray,
        next_obs_mat: np.ndarray,
        dones: np.ndarray,
        gamma: float | None = None,
    ) -> np.ndarray:
        """y_i = r_i + gamma * (1 - d_i) * Q'(s', mu'(s'))."""
        gamma = self.hyper.gamma if gamma is None else gamma
        head_next = nets.forward(self.head, next_obs_mat[:, 2:])
        user_next = next_obs_mat[:, :2]
        next_actions = self.max_speed * nets.forward(
            self.target_actor_tail, np.hstack([head_next, user_next])
        )
        speeds = np.linalg.norm(next_actions, axis=1, keepdims=True)
        next_actions *= np.minimum(1.0, self.max_speed / np.maximum(speeds, 1e-12))
        q_next = nets.forward(
            self.target_critic_tail, np.hstack([head_next, user_next, next_actions])
        )[:, 0]
        return rewards + gamma * (1.0 - dones) * q_next

    def train_step(self, batch: list[Transition]) -> tuple[float, float]:
        """One DDPG update on a labeled minibatch; returns (critic loss,
        actor objective)."""
        if any(not t.labeled for t in batch):
            raise RuntimeError("train_step requires labeled transitions")
        n = len(batch)
        obs_mat = np.stack([t.obs.vec for t in batch])
        actions = np.stack([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        next_mat = np.stack([t.next_obs.vec for t in batch])
        dones = np.array([1.0 if t.done else 0.0 for t in batch])

        targets = self.critic_targets(rewards, next_mat, dones)

        head_out = nets.forward(self.head, obs_mat[:, 2:])
        user = obs_mat[:, :2]
        critic_in = np.hstack([head_out, user, actions])
        q_values = nets.forward(self.critic_tail, critic_in)[:, 0]
        errors = q_values - targets
        critic_loss = float(np.mean(errors**2))
        upstream = (2.0 / n) * errors[:, None]
        critic_grads = nets.backward(self.critic_tail, critic_in, upstream)
        nets.adam_step(self.critic_tail, critic_grads, self.critic_opt)

        # Actor ascends mean Q(s, mu(s)) through the critic's action input.
        tail_in = np.hstack([head_out, user])
        raw = nets.forward(self.actor_tail, tail_in)
        mu_actions = self.max_speed * raw
        critic_in_mu = np.hstack([head_out, user, mu_actions])
        q_mu = nets.forward(self.critic_tail, critic_in_mu)[:, 0]
        actor_objective = float(np.mean(q_mu))
        bundle = nets.backward(
            self.critic_tail, critic_in_mu, np.full((n, 1), 1.0 / n)
        )
        dq_da = bundle.input_grad[:, -2:]
        actor_grads = nets.backward(self.actor_tail, tail_in, -self.max_speed * dq_da)
        nets.adam_step(self.actor_tail, actor_grads, self.actor_opt)

        nets.soft_update(self.target_actor_tail, self.actor_tail, self.hyper.tau)
        nets.soft_update(self.target_critic_tail, self.critic_tail, self.hyper.tau)
        return critic_loss, actor_objective

    # -- persistence ---------------------------------------------------------

    def save(self, path: str, extra_metadata: dict | None = None) -> None:
        metadata = {
            "goal_count": self.goal_count,
            "max_speed": self.max_speed,
            "hyper": vars(self.hyper) | {},
        }
        if extra_metadata:
            metadata.update(extra_metadata)
        nets.save_checkpoint(
            path,
            {
                "head": self.head,
                "actor_tail": self.actor_tail,
                "critic_tail": self.critic_tail,
                "target_actor_tail": self.target_actor_tail,
                "target_critic_tail": self.target_critic_tail,
            },
            metadata,
        )

    @classmethod
    def load(cls, path: str) -> "ArbitrationAgent":
        networks, metadata = nets.load_checkpoint(path)
        hyper = AgentHyperparams(**metadata["hyper"])
        return cls(
            head=networks["head"],
            actor_tail=networks["actor_tail"],
            critic_tail=networks["critic_tail"],
            target_actor_tail=networks["target_actor_tail"],
            target_critic_tail=networks["target_critic_tail"],
            hyper=hyper,
            goal_count=metadata["goal_count"],
            max_speed=metadata["max_speed"],
        )

    def clone(self) -> "ArbitrationAgent":
        agent = ArbitrationAgent(
            head=self.head.copy(),
            actor_tail=self.actor_tail.copy(),
            critic_tail=self.critic_tail.copy(),
            target_actor_tail=self.target_actor_tail.copy(),
            target_critic_tail=self.target_critic_tail.copy(),
            hyper=self.hyper,
            goal_count=self.goal_count,
            max_speed=self.max_speed,
        )
        return agent


def hindsight_label(
    episode: EpisodeBuffer,
    true_goal: int,
    reward_params: RewardParams,
) -> list[Transition]:
    """Fill in rewards for a finished episode and clear the episode buffer.

    The final transition must be terminal; labeling preserves order.
    """
    if not episode.transitions:
        raise RuntimeError("cannot label an empty episode")
    if not episode.transitions[-1].done:
        raise RuntimeError("cannot label before the episode has terminated")
    labeled = []
    for transition in episode.transitions:
        breakdown = compute_reward(
            transition.obs, transition.action, transition.events, true_goal, reward_params
        )
        labeled.append(replace(transition, reward=breakdown.total, true_goal=true_goal))
    episode.clear()
    return labeled
