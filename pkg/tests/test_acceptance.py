"""Acceptance gate: every criterion as a test, one PASS/FAIL line each.

The expensive fixture pretrains the networks once, then runs the 300-episode
training comparison (combined vs. environment-only reward, three seeds each,
straight user) plus one repeated run for the determinism audit. Checkpoints
for the evaluation table and the trace checks are selected by best trailing
return, mirroring how rollout models are usually picked.
"""

import json
import math
import time

import numpy as np
import pytest

from arbiter import nets
from arbiter.agent import AgentHyperparams, ArbitrationAgent
from arbiter.circular import classify_modality, count_modes_oracle, vm_pdf
from arbiter.config import RunConfig, RunParams
from arbiter.env import EnvConfig, EnvEvents, reset, step
from arbiter.pretrain import PretrainParams, pretrain_agent
from arbiter.rewards import RewardParams, agreement_reward, compute_reward, env_reward
from arbiter.subpolicies import subpolicy_action
from arbiter.training import run_training
from arbiter.harness import run_eval, run_trace

from test_circular import random_unambiguous_mixture
from test_nets import max_rel_error, random_net, sample_input_clear_of_kinks
from test_rewards import make_obs

ENV = EnvConfig()
PRETRAIN_SEED = 0
TRAIN_SEEDS = (1, 2, 3)
EVAL_SEED = 9090
EVAL_EPISODES = 15


def report(name: str, passed: bool, detail: str) -> None:
    print(f"{'PASS' if passed else 'FAIL'} — {name} — {detail}")
    assert passed, f"{name}: {detail}"


def trailing_success(metrics: list[dict], window: int = 20) -> float:
    return float(np.mean([1.0 if m["success"] else 0.0 for m in metrics[-window:]]))


def trailing_return(metrics: list[dict], window: int = 20) -> float:
    return float(np.mean([m["return"] for m in metrics[-window:]]))


@pytest.fixture(scope="module")
def artifacts():
    out = {}
    t0 = time.perf_counter()
    base, pretrain_report = pretrain_agent(
        ENV, AgentHyperparams(), PretrainParams(), seed=PRETRAIN_SEED
    )
    out["pretrain_report"] = pretrain_report
    out["pretrain_seconds"] = time.perf_counter() - t0

    def train(mode: str, seed: int):
        config = RunConfig(
            run=RunParams(seed=seed, episodes=300), reward=RewardParams(mode=mode)
        )
        return config, run_training(config, base.clone(), seed=seed)

    t0 = time.perf_counter()
    runs = {mode: {} for mode in ("combined", "env_only")}
    for mode in ("combined", "env_only"):
        for seed in TRAIN_SEEDS:
            runs[mode][seed] = train(mode, seed)
    out["runs"] = runs
    _, repeat = train("combined", TRAIN_SEEDS[0])
    out["repeat_metrics"] = repeat.metrics
    out["training_seconds"] = time.perf_counter() - t0

    out["best"] = {
        mode: max(
            runs[mode].values(), key=lambda pair: trailing_return(pair[1].metrics)
        )[1]
        for mode in ("combined", "env_only")
    }
    return out


def test_circular_quadrature_and_uniform_limit():
    t0 = time.perf_counter()
    xs = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
    worst = 0.0
    for kappa in (0.0, 0.5, 2.0, 8.0, 50.0):
        total = float(np.sum(vm_pdf(xs, 0.3, kappa))) * (2 * math.pi / 4096)
        worst = max(worst, abs(total - 1.0))
    exact = all(vm_pdf(x, 1.0, 0.0) == 1.0 / (2 * math.pi) for x in (-2.0, 0.0, 0.7))
    elapsed = time.perf_counter() - t0
    report(
        "circular quadrature",
        worst < 1e-6 and exact and elapsed < 1.0,
        f"max |integral-1| {worst:.2e}, uniform limit exact {exact}, {elapsed:.2f}s",
    )


def test_circular_modality_agreement():
    rng = np.random.default_rng(42)
    agree = 0
    for _ in range(200):
        mixture, _ = random_unambiguous_mixture(rng)
        agree += int(
            (not classify_modality(mixture).multimodal)
            == (count_modes_oracle(mixture) == 1)
        )
    report("modality agreement", agree == 200, f"{agree}/200 unambiguous mixtures")


def test_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        net = random_net(rng)
        x = sample_input_clear_of_kinks(net, rng)
        worst = max(worst, max_rel_error(net, x))
    # critic-shaped action-input gradients
    agent = ArbitrationAgent.build(ENV.goal_count, ENV.max_speed, AgentHyperparams(), rng)
    for seed in range(5):
        obs = make_obs(sub_actions=rng.uniform(-0.2, 0.2, (3, 2)), scores=[0.2, 0.5, 0.3])
        action = rng.uniform(-0.2, 0.2, 2)
        head_out = agent.head_forward(obs.core)
        critic_in = np.concatenate([head_out, obs.user_action, action])
        analytic = nets.backward(agent.critic_tail, critic_in, np.ones(1)).input_grad[-2:]
        for i in range(2):
            d = np.zeros(2)
            d[i] = 1e-5
            numeric = (
                agent.critic_forward(obs, action + d) - agent.critic_forward(obs, action - d)
            ) / 2e-5
            denom = max(abs(numeric), abs(analytic[i]), 1e-6)
            worst = max(worst, abs(numeric - analytic[i]) / denom)
    elapsed = time.perf_counter() - t0
    report(
        "gradient checks",
        worst < 1e-4 and elapsed < 10.0,
        f"max rel err {worst:.2e} over 50 nets + critic action grads, {elapsed:.1f}s",
    )


def test_subpolicy_reachability():
    t0 = time.perf_counter()
    clean = 0
    total = 0
    for goal in range(ENV.goal_count):
        for seed in range(100):
            state = reset(ENV, 5000 + seed)
            reached = False
            collided = False
            for _ in range(ENV.max_steps):
                state, events = step(state, subpolicy_action(state, goal, ENV), ENV)
                collided = collided or events.obstacle_collision
                if (
                    np.linalg.norm(state.gripper_pos - state.goal_positions[goal])
                    < ENV.reach_radius
                ):
                    reached = True
                    break
            total += 1
            clean += int(reached and not collided)
    elapsed = time.perf_counter() - t0
    report(
        "sub-policy reachability",
        clean / total >= 0.99 and elapsed < 30.0,
        f"{clean}/{total} collision-free reaches, {elapsed:.1f}s",
    )


def test_reward_unit_cases():
    ok = env_reward(EnvEvents(), 0) == 0.0
    ok &= env_reward(EnvEvents(obstacle_collision=True), 0) == -10.0
    ok &= env_reward(EnvEvents(obstacle_collision=True, boundary_contact=True), 0) == -12.0

    r_opposite, _ = agreement_reward(
        np.array([0.15, 0.0]), np.array([-0.15, 0.0]), np.zeros(2), multimodal=True
    )
    ok &= r_opposite == -4.0

    # branch isolation: multimodal ignores the true-goal action; unimodal
    # depends on the user only through the speed term
    multi_obs = make_obs([[0.2, 0.0], [-0.2, 0.0], [0.0, 0.2]], [0.5, 0.5, 0.0], (0.1, 0.1))
    a_s = np.array([0.05, 0.12])
    ok &= (
        compute_reward(multi_obs, a_s, EnvEvents(), 0).r_agree
        == compute_reward(multi_obs, a_s, EnvEvents(), 2).r_agree
    )
    uni_a = make_obs([[0.0, 0.2], [0.1, 0.17], [-0.1, 0.17]], [0.9, 0.06, 0.04], (0.2, 0.0))
    uni_b = make_obs([[0.0, 0.2], [0.1, 0.17], [-0.1, 0.17]], [0.9, 0.06, 0.04], (0.0, 0.2))
    ra = compute_reward(uni_a, a_s, EnvEvents(), 0)
    rb = compute_reward(uni_b, a_s, EnvEvents(), 0)
    ok &= not ra.modality.multimodal
    ok &= abs(ra.r_agree - rb.r_agree) < 1e-12
    report("reward unit cases", bool(ok), "0 / -4 / -10 / -12 and branch isolation exact")


def test_pretraining_quality(artifacts):
    rep = artifacts["pretrain_report"]
    bar = 0.01 * ENV.max_speed
    ok = rep["stage1_val_l2"] < bar and rep["stage2_val_l2"] < bar
    ok &= rep["user_sensitivity_var"] < 1e-3 * ENV.max_speed**2
    report(
        "pretraining",
        bool(ok),
        f"head {rep['stage1_val_l2']:.5f}, actor {rep['stage2_val_l2']:.5f} "
        f"(bar {bar:.5f}), user sensitivity {rep['user_sensitivity_var']:.1e}, "
        f"{artifacts['pretrain_seconds']:.0f}s",
    )


def test_training_success_and_divergence(artifacts):
    combined = [
        trailing_success(art.metrics) for _, art in artifacts["runs"]["combined"].values()
    ]
    env_only = [
        trailing_success(art.metrics) for _, art in artifacts["runs"]["env_only"].values()
    ]
    best = max(combined)
    minutes = (artifacts["pretrain_seconds"] + artifacts["training_seconds"]) / 60.0
    ok = best >= 0.80 and float(np.mean(combined)) > float(np.mean(env_only))
    ok &= minutes < 20.0
    report(
        "training success + divergence",
        bool(ok),
        f"combined trailing {['%.2f' % c for c in combined]} (best {best:.2f} >= 0.80), "
        f"env-only {['%.2f' % e for e in env_only]}, "
        f"means {np.mean(combined):.2f} > {np.mean(env_only):.2f}, {minutes:.1f} min",
    )


def _eval_cell(agent, assistance, user_mode):
    config = RunConfig(run=RunParams(seed=EVAL_SEED, eval_episodes=EVAL_EPISODES))
    return run_eval(config, agent, assistance=assistance, user_mode=user_mode)["aggregates"]


def test_evaluation_table_relations(artifacts):
    """Table-style comparison on 15 matched-seed episodes per cell.

    Both learned arms are evaluated with all three training seeds and the
    per-15-episode statistics are averaged across seeds: the episodes stay
    matched across arms, and the comparison reflects the training procedure
    rather than one lucky checkpoint.
    """
    users = ("noisy0.5", "noisy1.0", "straight", "biased")
    cells = {}
    for user in users:
        for mode in ("combined", "env_only"):
            per_seed = [
                _eval_cell(art.agent, "shared", user)
                for _, art in artifacts["runs"][mode].values()
            ]
            cells[(user, mode)] = {
                "success": float(np.mean([a["success_count"] for a in per_seed])),
                "collisions": float(np.mean([a["collision_episodes"] for a in per_seed])),
                "travel": float(np.mean([a["travel_mean_cm"] for a in per_seed])),
            }
        direct = _eval_cell(None, "direct", user)
        cells[(user, "direct")] = {
            "success": float(direct["success_count"]),
            "collisions": float(direct["collision_episodes"]),
            "travel": float(direct["travel_mean_cm"]),
        }

    checks = {
        "straight collisions combined<direct": cells[("straight", "combined")]["collisions"]
        < cells[("straight", "direct")]["collisions"],
        "noisy1.0 travel combined<direct": cells[("noisy1.0", "combined")]["travel"]
        < cells[("noisy1.0", "direct")]["travel"],
        "biased success combined>direct": cells[("biased", "combined")]["success"]
        > cells[("biased", "direct")]["success"],
    }
    for user in users:
        checks[f"{user} success combined>=env_only"] = (
            cells[(user, "combined")]["success"] >= cells[(user, "env_only")]["success"]
        )
    summary = "; ".join(
        f"{user}: C {cells[(user, 'combined')]['success']:.1f} "
        f"E {cells[(user, 'env_only')]['success']:.1f} D {cells[(user, 'direct')]['success']:.0f}"
        for user in users
    )
    report("evaluation table relations", all(checks.values()), f"{checks} | {summary}")


def test_trace_authority_handover(artifacts):
    config = RunConfig(run=RunParams(seed=EVAL_SEED, eval_episodes=EVAL_EPISODES))
    rows = run_trace(
        config, artifacts["best"]["combined"].agent, episodes=EVAL_EPISODES, user_mode="straight"
    )
    radius = ENV.obstacle_radius
    multi = [r for r in rows if r["modality"] == "multimodal"]
    uni_near = [
        r
        for r in rows
        if r["modality"] == "unimodal" and (r["obstacle_dist"] + radius) <= 2 * radius
    ]
    multi_user = float(np.mean([r["l2_user"] for r in multi]))
    multi_pred = float(np.mean([r["l2_predicted"] for r in multi]))
    uni_user = float(np.mean([r["l2_user"] for r in uni_near]))
    uni_pred = float(np.mean([r["l2_predicted"] for r in uni_near]))
    ok = multi_user < multi_pred and uni_user > uni_pred
    report(
        "trace authority handover",
        ok,
        f"multimodal ({len(multi)} steps): user {multi_user:.4f} < predicted {multi_pred:.4f}; "
        f"unimodal near obstacle ({len(uni_near)} steps): user {uni_user:.4f} > predicted {uni_pred:.4f}",
    )


def test_service_shared_episode_with_trained_agent(artifacts):
    """A scripted straight-driving client completes a shared-control episode."""
    import json as jsonlib

    from fastapi.testclient import TestClient

    from arbiter.config import ServiceParams
    from arbiter.service import create_app

    config = RunConfig(
        run=RunParams(seed=4), service=ServiceParams(tick_hz=400.0, send_queue_depth=64)
    )
    app = create_app(config, artifacts["best"]["combined"].agent)
    client = TestClient(app)
    successes = 0
    attempts = 3
    with client.websocket_connect("/session") as ws:
        ws.receive_json()
        for _ in range(attempts):
            ws.send_text(jsonlib.dumps({"type": "control", "command": "start", "goal": 1}))
            state = None
            while True:
                message = ws.receive_json()
                if message["type"] != "state":
                    continue
                state = message
                if state["episode"]["done"]:
                    break
                gripper = np.array(state["gripper"])
                goal = np.array(state["goals"][1])
                direction = goal - gripper
                norm = float(np.linalg.norm(direction))
                if norm > 0:
                    direction = direction / norm * config.env.max_speed
                ws.send_text(
                    jsonlib.dumps({"type": "input", "vx": direction[0], "vy": direction[1]})
                )
            successes += int(state["episode"]["success"])
    report(
        "shared-mode teleop session",
        successes >= 2,
        f"{successes}/{attempts} scripted shared episodes reached the intended goal",
    )


def test_determinism_and_replay_hygiene(artifacts):
    _, first = artifacts["runs"]["combined"][TRAIN_SEEDS[0]]
    repeat_metrics = artifacts["repeat_metrics"]
    identical = json.dumps(first.metrics, sort_keys=True) == json.dumps(
        repeat_metrics, sort_keys=True
    )

    hygiene = True
    detail = []
    for mode in ("combined", "env_only"):
        for seed, (config, art) in artifacts["runs"][mode].items():
            expected = sum(m["steps"] for m in art.metrics)
            hygiene &= len(art.replay) == min(expected, art.agent.hyper.replay_capacity)
            hygiene &= all(t.labeled for t in art.replay.buffer)
    config, art = artifacts["runs"]["combined"][TRAIN_SEEDS[0]]
    rng = np.random.default_rng(1)
    sample = art.replay.sample(rng, 500)
    reproducible = all(
        t.reward == compute_reward(t.obs, t.action, t.events, t.true_goal, config.reward).total
        for t in sample
    )
    ok = identical and hygiene and reproducible
    report(
        "determinism + replay hygiene",
        bool(ok),
        f"metrics bitwise identical {identical}, replay fully labeled {hygiene}, "
        f"rewards reproducible on 500 samples {reproducible}",
    )
