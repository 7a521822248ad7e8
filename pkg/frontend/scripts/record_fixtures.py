#!/usr/bin/env python3
"""Record real server sessions into JSON fixtures for the frontend tests.

Runs the teleop service in-process, plays one direct-mode and one
shared-mode episode with a scripted straight-driving client, and writes the
full message transcripts (including the hello frame) to test/fixtures/.

Usage: python3 scripts/record_fixtures.py [checkpoint]
With no checkpoint, a small pretraining pass builds the shared-mode agent.
"""

import json
import os
import sys

import numpy as np
from fastapi.testclient import TestClient

from arbiter.agent import AgentHyperparams, ArbitrationAgent
from arbiter.config import RunConfig, RunParams, ServiceParams
from arbiter.env import EnvConfig
from arbiter.pretrain import PretrainParams, pretrain_agent
from arbiter.service import create_app

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "test", "fixtures")


def record_episode(client, mode: str, goal: int) -> list[dict]:
    transcript = []
    with client.websocket_connect("/session") as ws:
        hello = ws.receive_json()
        transcript.append(hello)
        ws.send_text(json.dumps({"type": "control", "command": "set_mode", "mode": mode}))
        ws.send_text(json.dumps({"type": "control", "command": "start", "goal": goal}))
        while True:
            message = ws.receive_json()
            transcript.append(message)
            if message["type"] != "state":
                continue
            if message["episode"]["done"]:
                break
            gripper = np.array(message["gripper"])
            target = np.array(message["goals"][goal])
            direction = target - gripper
            norm = float(np.linalg.norm(direction))
            if norm > 0:
                direction = direction / norm * hello["config"]["max_speed"]
            ws.send_text(json.dumps({"type": "input", "vx": direction[0], "vy": direction[1]}))
    return transcript


def main() -> int:
    if len(sys.argv) > 1:
        agent = ArbitrationAgent.load(sys.argv[1])
    else:
        params = PretrainParams(
            samples=3000, stage1_epochs=80, stage2_link_epochs=40,
            stage2_tune_epochs=60, tolerance=0.35,
        )
        agent, _ = pretrain_agent(EnvConfig(), AgentHyperparams(), params, seed=1234)

    os.makedirs(FIXTURES, exist_ok=True)
    config = RunConfig(
        run=RunParams(seed=11), service=ServiceParams(tick_hz=400.0, send_queue_depth=64)
    )
    client = TestClient(create_app(config, agent))

    direct = record_episode(client, "direct", goal=1)
    with open(os.path.join(FIXTURES, "session_direct.json"), "w") as fh:
        json.dump(direct, fh)
    print(f"direct: {len(direct)} frames, success="
          f"{direct[-1]['episode']['success']}")

    for attempt in range(10):
        shared = record_episode(client, "shared", goal=1)
        if shared[-1]["episode"]["success"]:
            break
    with open(os.path.join(FIXTURES, "session_shared.json"), "w") as fh:
        json.dump(shared, fh)
    print(f"shared: {len(shared)} frames, success="
          f"{shared[-1]['episode']['success']} (attempt {attempt})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
