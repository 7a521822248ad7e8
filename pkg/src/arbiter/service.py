"""Live teleoperation bridge.

One WebSocket session owns one environment episode at a time and runs the
exact per-tick pipeline used offline, so a recorded input log replays to the
same state sequence. State messages are pushed at the tick rate through a
bounded queue (oldest dropped first) so a slow client never stalls the loop.

Endpoints: WS /session, GET /health, GET /config.
"""

from __future__ import annotations

import asyncio
import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import env
from .agent import ArbitrationAgent
from .config import RunConfig, config_as_dict
from .env import clamp_speed
from .intent import TrajectoryHistory
from .training import PipelineStep, episode_seed, step_pipeline
from .users import UserModel, sample_user, user_action

_SESSION_COUNTER = itertools.count(1)


@dataclass
class SessionState:
    session_id: str
    config: RunConfig
    agent: ArbitrationAgent | None
    assistance: str = "shared"
    tick: int = 0
    episode_index: int = -1
    episode_steps: int = 0
    episode_active: bool = False
    episode_done: bool = False
    episode_success: bool = False
    intended_goal: int | None = None
    env_seed: int | None = None
    state: env.WorkspaceState | None = None
    history: TrajectoryHistory | None = None
    latest_input: np.ndarray = field(default_factory=lambda: np.zeros(2))
    latest_input_tick: int = -(10**9)
    simulated_user: UserModel | None = None

    def start_episode(self, goal: int | None, user_mode: str | None) -> None:
        self.episode_index += 1
        self.env_seed = episode_seed(self.config.run.seed, self.episode_index, stream=7)
        self.state = env.reset(self.config.env, self.env_seed)
        self.history = TrajectoryHistory.begin(self.state)
        self.episode_steps = 0
        self.episode_active = True
        self.episode_done = False
        self.episode_success = False
        self.intended_goal = goal
        self.latest_input = np.zeros(2)
        self.latest_input_tick = -(10**9)
        self.simulated_user = None
        if user_mode:
            true_goal = goal if goal is not None else 0
            self.simulated_user = sample_user(
                user_mode,
                true_goal,
                episode_seed(self.config.run.seed, self.episode_index, stream=8),
                self.config.env,
                bias_offset_scale=self.config.user.bias_offset_scale,
            )

    def current_user_command(self) -> np.ndarray:
        if self.simulated_user is not None:
            return user_action(self.simulated_user, self.state, self.config.env)
        if self.tick - self.latest_input_tick > self.config.service.stale_input_ticks:
            return np.zeros(2)
        return clamp_speed(self.latest_input, self.config.env.max_speed)

    def advance(self) -> tuple[PipelineStep, env.EnvEvents]:
        command = self.current_user_command()
        pipe = step_pipeline(
            self.state,
            self.history,
            command,
            self.agent,
            self.config,
            assistance=self.assistance,
        )
        next_state, events = env.step(self.state, pipe.arbitrated, self.config.env)
        self.history.append(next_state.gripper_pos, next_state.gripper_vel, self.config.env.dt)
        self.state = next_state
        self.episode_steps += 1
        if events.terminated:
            self.episode_active = False
            self.episode_done = True
            self.episode_success = (
                events.goal_reached is not None and events.goal_reached == self.intended_goal
            )
        return pipe, events


def state_message(session: SessionState, pipe: PipelineStep, events: env.EnvEvents) -> dict:
    state = session.state
    return {
        "type": "state",
        "session": session.session_id,
        "tick": session.tick,
        "gripper": [float(x) for x in state.gripper_pos],
        "obstacle": [float(x) for x in state.obstacle_pos],
        "goals": [[float(x) for x in goal] for goal in state.goal_positions],
        "scores": [float(s) for s in pipe.belief.scores],
        "sub_actions": [[float(x) for x in sub.action] for sub in pipe.sub_actions],
        "user_action": [float(x) for x in pipe.user_command],
        "arbitrated_action": [float(x) for x in pipe.arbitrated],
        "modality": pipe.modality.label,
        "events": {
            "obstacle_collision": events.obstacle_collision,
            "boundary_contact": events.boundary_contact,
            "goal_reached": events.goal_reached,
            "terminated": events.terminated,
        },
        "episode": {
            "index": session.episode_index,
            "steps": session.episode_steps,
            "done": session.episode_done,
            "success": session.episode_success,
            "env_seed": session.env_seed,
        },
    }


def _error(session_id: str, reason: str) -> dict:
    return {"type": "error", "session": session_id, "reason": reason}


def handle_message(session: SessionState, message: dict) -> dict | None:
    """Apply one client message; returns an immediate reply frame or None."""
    kind = message.get("type")
    if kind == "input":
        if not session.episode_active:
            return None  # inputs are ignored between episodes
        try:
            vx = float(message["vx"])
            vy = float(message["vy"])
        except (KeyError, TypeError, ValueError):
            return _error(session.session_id, "input needs numeric vx and vy")
        if not np.isfinite([vx, vy]).all():
            return _error(session.session_id, "input must be finite")
        session.latest_input = np.array([vx, vy])
        session.latest_input_tick = session.tick
        return None
    if kind == "control":
        command = message.get("command")
        if command in ("start", "reset"):
            goal = message.get("goal")
            if goal is not None:
                goal = int(goal)
                if not 0 <= goal < session.config.env.goal_count:
                    return _error(session.session_id, "goal index out of range")
            user_mode = message.get("user")
            try:
                session.start_episode(goal, user_mode)
            except ValueError as exc:
                return _error(session.session_id, str(exc))
            return None
        if command == "set_mode":
            if session.episode_active:
                return _error(session.session_id, "cannot switch mode mid-episode")
            mode = message.get("mode")
            if mode not in ("shared", "direct"):
                return _error(session.session_id, "mode must be 'shared' or 'direct'")
            session.assistance = mode
            return None
        return _error(session.session_id, f"unknown control command {command!r}")
    return _error(session.session_id, f"unknown message type {kind!r}")


def create_app(config: RunConfig, agent: ArbitrationAgent | None) -> FastAPI:
    app = FastAPI()

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/config")
    def resolved_config() -> dict:
        return config_as_dict(config)

    @app.websocket("/session")
    async def session_socket(websocket: WebSocket) -> None:
        await websocket.accept()
        session = SessionState(
            session_id=f"s{next(_SESSION_COUNTER)}", config=config, agent=agent
        )
        outbound: asyncio.Queue[dict] = asyncio.Queue(maxsize=config.service.send_queue_depth)

        def enqueue(frame: dict) -> None:
            while True:
                try:
                    outbound.put_nowait(frame)
                    return
                except asyncio.QueueFull:
                    try:
                        outbound.get_nowait()  # drop the oldest state
                    except asyncio.QueueEmpty:
                        pass

        await websocket.send_json(
            {
                "type": "hello",
                "session": session.session_id,
                "config": {
                    "max_speed": config.env.max_speed,
                    "workspace_side": config.env.workspace_side,
                    "goal_count": config.env.goal_count,
                    "obstacle_radius": config.env.obstacle_radius,
                    "reach_radius": config.env.reach_radius,
                    "tick_hz": config.service.tick_hz,
                    "kappa_min": config.reward.kappa_min,
                    "kappa_scale": config.reward.kappa_scale,
                    "peak_threshold": config.reward.peak_threshold,
                },
            }
        )

        async def reader() -> None:
            while True:
                raw = await websocket.receive_text()
                try:
                    message = json.loads(raw)
                    if not isinstance(message, dict):
                        raise ValueError("not an object")
                except ValueError:
                    enqueue(_error(session.session_id, "malformed JSON"))
                    continue
                reply = handle_message(session, message)
                if reply is not None:
                    enqueue(reply)

        async def writer() -> None:
            while True:
                frame = await outbound.get()
                await websocket.send_json(frame)

        async def ticker() -> None:
            loop = asyncio.get_running_loop()
            period = 1.0 / config.service.tick_hz
            deadline = loop.time() + period
            while True:
                delay = deadline - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                deadline += period
                session.tick += 1
                if session.episode_active:
                    pipe, events = session.advance()
                    enqueue(state_message(session, pipe, events))

        tasks = [
            asyncio.create_task(reader()),
            asyncio.create_task(writer()),
            asyncio.create_task(ticker()),
        ]
        try:
            done, _ = await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()

    return app


def replay_session(
    config: RunConfig,
    agent: ArbitrationAgent | None,
    env_seed: int,
    commands: list[np.ndarray],
    assistance: str = "shared",
) -> list[dict]:
    """Re-run a served episode offline from its seed and user-command log.

    Returns one row per tick with the gripper position, scores, and the
    arbitrated action; bit-identical to what the service produced.
    """
    state = env.reset(config.env, env_seed)
    history = TrajectoryHistory.begin(state)
    rows = []
    for command in commands:
        pipe = step_pipeline(
            state, history, np.asarray(command, dtype=float), agent, config, assistance=assistance
        )
        state, events = env.step(state, pipe.arbitrated, config.env)
        history.append(state.gripper_pos, state.gripper_vel, config.env.dt)
        rows.append(
            {
                "gripper": [float(x) for x in state.gripper_pos],
                "scores": [float(s) for s in pipe.belief.scores],
                "arbitrated_action": [float(x) for x in pipe.arbitrated],
                "modality": pipe.modality.label,
                "terminated": events.terminated,
            }
        )
        if events.terminated:
            break
    return rows
