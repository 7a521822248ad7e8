"""Run configuration: defaults, INI-file round-trip, and resolved dumps.

`arbiter config init` emits every default so runs are self-documenting;
reports embed the resolved configuration.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields

from .agent import AgentHyperparams
from .env import EnvConfig
from .errors import ConfigurationError
from .intent import DEFAULT_BETA, DEFAULT_SMOOTHING
from .pretrain import PretrainParams
from .rewards import RewardParams
from .users import DEFAULT_BIAS_OFFSET_SCALE


@dataclass(frozen=True)
class IntentParams:
    beta: float = DEFAULT_BETA
    smoothing: float = DEFAULT_SMOOTHING


@dataclass(frozen=True)
class UserParams:
    mode: str = "straight"  # straight | noisy0.5 | noisy1.0 | biased
    bias_offset_scale: float = DEFAULT_BIAS_OFFSET_SCALE


@dataclass(frozen=True)
class RunParams:
    seed: int = 0
    episodes: int = 300
    eval_episodes: int = 15
    output_dir: str = "runs/default"


@dataclass(frozen=True)
class ServiceParams:
    port: int = 8765
    tick_hz: float = 20.0
    stale_input_ticks: int = 10
    send_queue_depth: int = 2


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = EnvConfig()
    agent: AgentHyperparams = AgentHyperparams()
    reward: RewardParams = RewardParams()
    intent: IntentParams = IntentParams()
    user: UserParams = UserParams()
    run: RunParams = RunParams()
    pretrain: PretrainParams = PretrainParams()
    service: ServiceParams = ServiceParams()


_SECTIONS = {
    "env": EnvConfig,
    "agent": AgentHyperparams,
    "reward": RewardParams,
    "intent": IntentParams,
    "user": UserParams,
    "run": RunParams,
    "pretrain": PretrainParams,
    "service": ServiceParams,
}


def default_config() -> RunConfig:
    return RunConfig()


def config_to_ini(config: RunConfig) -> str:
    parser = configparser.ConfigParser()
    for section, _ in _SECTIONS.items():
        block = getattr(config, section)
        parser[section] = {f.name: str(getattr(block, f.name)) for f in fields(block)}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def _parse_value(raw: str, target_type: type):
    if target_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return target_type(raw)


def config_from_ini(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config file: {exc}") from exc

    blocks = {}
    for section, cls in _SECTIONS.items():
        known = {f.name: f.type for f in fields(cls)}
        types = {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}
        values = {}
        if parser.has_section(section):
            for key, raw in parser[section].items():
                if key not in known:
                    raise ConfigurationError(f"unknown key [{section}] {key}")
                try:
                    values[key] = _parse_value(raw, types[key])
                except ValueError as exc:
                    raise ConfigurationError(f"bad value for [{section}] {key}: {exc}") from exc
        try:
            blocks[section] = cls(**values)
        except Exception as exc:
            raise ConfigurationError(f"invalid [{section}] block: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}]")
    return RunConfig(**blocks)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return config_from_ini(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc


def config_as_dict(config: RunConfig) -> dict:
    return {
        section: {f.name: getattr(getattr(config, section), f.name) for f in fields(cls)}
        for section, cls in _SECTIONS.items()
    }
