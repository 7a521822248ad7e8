import numpy as np
import pytest

from arbiter import nets
from arbiter.agent import (
    AgentHyperparams,
    ArbitrationAgent,
    EpisodeBuffer,
    ReplayBuffer,
    Transition,
    hindsight_label,
)
from arbiter.env import EnvConfig, EnvEvents, reset
from arbiter.intent import GoalBelief
from arbiter.observation import assemble_observation
from arbiter.rewards import RewardParams, compute_reward
from arbiter.subpolicies import subpolicy_batch

CFG = EnvConfig()
HYP = AgentHyperparams()


@pytest.fixture(scope="module")
def agent():
    return ArbitrationAgent.build(CFG.goal_count, CFG.max_speed, HYP, np.random.default_rng(0))


def make_obs(seed=0, user=(0.05, 0.1), scores=None):
    state = reset(CFG, seed)
    subs = subpolicy_batch(state, CFG)
    scores = np.array(scores) if scores is not None else np.array([0.2, 0.5, 0.3])
    belief = GoalBelief(scores, np.zeros(3))
    return assemble_observation(state, np.array(user), subs, belief, CFG)


def make_transition(seed=0, done=False, events=None, reward=None):
    return Transition(
        obs=make_obs(seed),
        action=np.array([0.05, 0.1]),
        next_obs=make_obs(seed + 1),
        done=done,
        events=events or EnvEvents(terminated=done),
        reward=reward,
    )


def test_network_shapes(agent):
    assert agent.head.input_dim == 15 and agent.head.output_dim == 2
    assert [l.weights.shape[1] for l in agent.head.layers] == [32, 32, 32, 2]
    assert agent.actor_tail.input_dim == 4
    assert [l.weights.shape[1] for l in agent.actor_tail.layers] == [16, 16, 16, 2]
    assert agent.actor_tail.layers[-1].activation == "tanh"
    assert agent.critic_tail.input_dim == 6
    assert [l.weights.shape[1] for l in agent.critic_tail.layers] == [128, 128, 1]


def test_actor_deterministic_and_bounded(agent):
    obs = make_obs()
    a1 = agent.actor_forward(obs)
    a2 = agent.actor_forward(obs)
    assert np.array_equal(a1, a2)
    rng = np.random.default_rng(1)
    for seed in range(20):
        action = agent.actor_forward(make_obs(seed, user=tuple(rng.uniform(-0.2, 0.2, 2))))
        assert np.linalg.norm(action) <= CFG.max_speed + 1e-12


def test_select_action_zero_noise_equals_actor(agent):
    obs = make_obs()
    rng = np.random.default_rng(2)
    assert np.array_equal(agent.select_action(obs, rng, 0.0), agent.actor_forward(obs))


def test_select_action_reproducible(agent):
    obs = make_obs()
    a = agent.select_action(obs, np.random.default_rng(3), 0.02)
    b = agent.select_action(obs, np.random.default_rng(3), 0.02)
    assert np.array_equal(a, b)


def test_select_action_noise_scale(agent):
    obs = make_obs()
    base = agent.actor_forward(obs)
    assert np.linalg.norm(base) < 0.5 * CFG.max_speed  # fresh init outputs are small
    sigma = 0.01
    rng = np.random.default_rng(4)
    draws = np.stack([agent.select_action(obs, rng, sigma) - base for _ in range(10_000)])
    std = draws.std(axis=0)
    assert np.all(np.abs(std - sigma) < 0.05 * sigma)


def test_critic_forward_scalar_and_deterministic(agent):
    obs = make_obs()
    action = np.array([0.1, -0.05])
    q1 = agent.critic_forward(obs, action)
    q2 = agent.critic_forward(obs, action)
    assert isinstance(q1, float) and q1 == q2


def test_critic_action_gradient_matches_finite_difference(agent):
    obs = make_obs()
    action = np.array([0.07, -0.03])
    head_out = agent.head_forward(obs.core)
    critic_in = np.concatenate([head_out, obs.user_action, action])
    bundle = nets.backward(agent.critic_tail, critic_in, np.ones(1))
    analytic = bundle.input_grad[-2:]
    h = 1e-5
    for i in range(2):
        d = np.zeros(2)
        d[i] = h
        fp = agent.critic_forward(obs, action + d)
        fm = agent.critic_forward(obs, action - d)
        numeric = (fp - fm) / (2 * h)
        assert abs(numeric - analytic[i]) / max(abs(numeric), abs(analytic[i]), 1e-6) < 1e-4


def test_replay_buffer_rejects_unlabeled():
    buffer = ReplayBuffer(10)
    with pytest.raises(ValueError):
        buffer.push(make_transition())


def test_replay_buffer_evicts_oldest():
    buffer = ReplayBuffer(3)
    for i in range(5):
        buffer.push(make_transition(seed=i, reward=float(i)))
    assert len(buffer) == 3
    assert sorted(t.reward for t in buffer.buffer) == [2.0, 3.0, 4.0]


def test_hindsight_label_requires_termination():
    episode = EpisodeBuffer()
    episode.add(make_transition(done=False))
    with pytest.raises(RuntimeError):
        hindsight_label(episode, 0, RewardParams())
    episode.clear()
    with pytest.raises(RuntimeError):
        hindsight_label(episode, 0, RewardParams())


def test_hindsight_label_counts_and_clears():
    episode = EpisodeBuffer()
    for i in range(6):
        episode.add(make_transition(seed=i, done=(i == 5)))
    labeled = hindsight_label(episode, 1, RewardParams())
    assert len(labeled) == 6 and len(episode) == 0
    low = -12.0 - 4.0 - 2.0 * CFG.max_speed
    for t in labeled:
        assert t.labeled and low <= t.reward <= 10.0 and t.true_goal == 1


def test_hindsight_rewards_reproducible():
    episode = EpisodeBuffer()
    for i in range(4):
        episode.add(make_transition(seed=i, done=(i == 3)))
    labeled = hindsight_label(episode, 2, RewardParams())
    for t in labeled:
        again = compute_reward(t.obs, t.action, t.events, 2, RewardParams())
        assert t.reward == again.total


def test_relabel_changes_only_unimodal_and_bonus():
    # one multimodal observation (balanced scores, opposed directions),
    # one strongly unimodal observation
    from arbiter.subpolicies import SubpolicyAction

    state = reset(CFG, 3)
    subs = subpolicy_batch(state, CFG)
    opposed = [
        SubpolicyAction(0, np.array([0.2, 0.0])),
        SubpolicyAction(1, np.array([-0.2, 0.0])),
        SubpolicyAction(2, np.array([0.0, 0.2])),
    ]
    multi_obs = assemble_observation(
        state, np.array([0.1, 0.0]), opposed, GoalBelief(np.array([0.5, 0.5, 0.0]), np.zeros(3)), CFG
    )
    uni_obs = assemble_observation(
        state, np.array([0.1, 0.0]), subs, GoalBelief(np.array([0.9, 0.07, 0.03]), np.zeros(3)), CFG
    )
    action = np.array([0.02, 0.1])
    params = RewardParams()

    def labels(goal):
        episode = EpisodeBuffer()
        episode.add(Transition(multi_obs, action, multi_obs, False, EnvEvents()))
        episode.add(Transition(uni_obs, action, uni_obs, True, EnvEvents(terminated=True)))
        return hindsight_label(episode, goal, params)

    a = labels(0)
    b = labels(2)
    assert a[0].reward == b[0].reward  # multimodal step unchanged
    assert a[1].reward != b[1].reward  # unimodal step re-referenced


def test_critic_targets_gamma_zero_equals_reward(agent):
    batch = [make_transition(seed=i, reward=float(i)) for i in range(4)]
    rewards = np.array([t.reward for t in batch])
    next_mat = np.stack([t.next_obs.vec for t in batch])
    dones = np.zeros(4)
    targets = agent.critic_targets(rewards, next_mat, dones, gamma=0.0)
    assert np.allclose(targets, rewards, atol=1e-15)


def test_critic_targets_terminal_drops_bootstrap(agent):
    batch = [make_transition(seed=i, reward=1.0) for i in range(4)]
    rewards = np.ones(4)
    next_mat = np.stack([t.next_obs.vec for t in batch])
    targets = agent.critic_targets(rewards, next_mat, np.ones(4), gamma=0.95)
    assert np.allclose(targets, 1.0, atol=1e-15)


def test_train_step_rejects_unlabeled(agent):
    with pytest.raises(RuntimeError):
        agent.train_step([make_transition()])


def test_train_step_convergence_single_transition():
    rng = np.random.default_rng(5)
    local = ArbitrationAgent.build(CFG.goal_count, CFG.max_speed, AgentHyperparams(), rng)
    local.hyper = AgentHyperparams(gamma=0.0)
    t = make_transition(seed=0, done=True, reward=1.0)
    batch = [t] * 16
    q = None
    for i in range(5000):
        loss, _ = local.train_step(batch)
        q = local.critic_forward(t.obs, t.action)
        if abs(q - 1.0) < 1e-2:
            break
    assert abs(q - 1.0) < 1e-2


def test_train_step_leaves_frozen_head_untouched():
    rng = np.random.default_rng(6)
    local = ArbitrationAgent.build(CFG.goal_count, CFG.max_speed, AgentHyperparams(), rng)
    for layer in local.head.layers:
        layer.frozen = True
    snapshot = [layer.weights.copy() for layer in local.head.layers]
    batch = [make_transition(seed=i, done=(i % 3 == 0), reward=float(i % 5) - 2) for i in range(8)]
    for _ in range(10):
        local.train_step(batch)
    for snap, layer in zip(snapshot, local.head.layers):
        assert np.array_equal(snap, layer.weights)


def test_target_networks_contract_toward_online():
    rng = np.random.default_rng(7)
    local = ArbitrationAgent.build(CFG.goal_count, CFG.max_speed, AgentHyperparams(), rng)
    for layer in local.target_actor_tail.layers:
        layer.weights += 0.5

    def gap():
        return sum(
            float(np.sum((a.weights - b.weights) ** 2))
            for a, b in zip(local.target_actor_tail.layers, local.actor_tail.layers)
        )

    before = gap()
    batch = [make_transition(seed=i, reward=0.5) for i in range(8)]
    local.train_step(batch)
    after = gap()
    assert after < before


def test_agent_checkpoint_roundtrip(tmp_path, agent):
    path = str(tmp_path / "agent.ckpt")
    agent.save(path)
    loaded = ArbitrationAgent.load(path)
    obs = make_obs(9)
    assert np.array_equal(loaded.actor_forward(obs), agent.actor_forward(obs))
    assert loaded.hyper == agent.hyper
    assert loaded.goal_count == agent.goal_count
