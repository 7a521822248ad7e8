import numpy as np
import pytest

from arbiter.agent import AgentHyperparams
from arbiter.config import RunConfig
from arbiter.env import EnvConfig
from arbiter.pretrain import PretrainParams, pretrain_agent

# Small, fast pretraining setup for plumbing tests; the acceptance suite runs
# the real thing at the real tolerance.
QUICK_PRETRAIN = PretrainParams(
    samples=3000,
    stage1_epochs=80,
    stage2_link_epochs=40,
    stage2_tune_epochs=60,
    tolerance=0.35,
)


@pytest.fixture(scope="session")
def quick_agent():
    agent, _ = pretrain_agent(EnvConfig(), AgentHyperparams(), QUICK_PRETRAIN, seed=1234)
    return agent


@pytest.fixture(scope="session")
def quick_checkpoint(quick_agent, tmp_path_factory):
    path = str(tmp_path_factory.mktemp("ckpt") / "quick.ckpt")
    quick_agent.save(path)
    return path
