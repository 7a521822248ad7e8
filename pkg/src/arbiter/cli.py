"""Command-line entry point.

    arbiter config init [--output PATH]
    arbiter pretrain --config PATH [--seed N] [--checkpoint PATH]
    arbiter train --config PATH --checkpoint PATH [--seed N] [--episodes N]
    arbiter eval --config PATH --checkpoint PATH --assistance shared|direct
    arbiter trace --config PATH --checkpoint PATH
    arbiter serve --config PATH --checkpoint PATH [--port N]

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .agent import ArbitrationAgent
from .config import (
    RunConfig,
    config_as_dict,
    config_to_ini,
    default_config,
    load_config,
)
from .errors import ConfigurationError, PretrainingError
from .pretrain import pretrain_agent
from .training import run_training

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else default_config()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["run"] = _replace(config.run, seed=args.seed)
    if getattr(args, "episodes", None) is not None:
        run_block = overrides.get("run", config.run)
        overrides["run"] = _replace(run_block, episodes=args.episodes)
    if getattr(args, "user", None) is not None:
        overrides["user"] = _replace(config.user, mode=args.user)
    if getattr(args, "reward_mode", None) is not None:
        overrides["reward"] = _replace(config.reward, mode=args.reward_mode)
    if overrides:
        config = _replace(config, **overrides)
    return config


def _replace(block, **kwargs):
    from dataclasses import replace

    return replace(block, **kwargs)


def _outdir(config: RunConfig) -> str:
    os.makedirs(config.run.output_dir, exist_ok=True)
    return config.run.output_dir


def cmd_config_init(args) -> int:
    text = config_to_ini(default_config())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_pretrain(args) -> int:
    config = _load(args)
    out = _outdir(config)
    checkpoint = args.checkpoint or os.path.join(out, "pretrained.ckpt")
    try:
        agent, report = pretrain_agent(
            config.env,
            config.agent,
            config.pretrain,
            config.run.seed,
            beta=config.intent.beta,
            reward_params=config.reward,
        )
    except PretrainingError as exc:
        print(f"pretraining failed: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    agent.save(checkpoint)
    report_path = os.path.join(out, "pretrain_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump({"report": report, "config": config_as_dict(config)}, fh, sort_keys=True, indent=2)
    print(f"checkpoint: {checkpoint}")
    print(f"report: {report_path}")
    return 0


def cmd_train(args) -> int:
    config = _load(args)
    out = _outdir(config)
    if not os.path.exists(args.checkpoint):
        print(f"checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return RUNTIME_ERROR
    agent = ArbitrationAgent.load(args.checkpoint)
    artifacts = run_training(config, agent, config.run.seed)
    metrics_path = os.path.join(out, "train_metrics.jsonl")
    harness.write_metrics_jsonl(metrics_path, artifacts.metrics)
    final_path = os.path.join(out, "final.ckpt")
    artifacts.agent.save(final_path)
    best_episode = max(artifacts.metrics, key=lambda m: m["return_ma10"])["episode"]
    best_path = os.path.join(out, "best.ckpt")
    artifacts.agent.save(best_path, extra_metadata={"best_episode": best_episode})
    print(f"metrics: {metrics_path}")
    print(f"final checkpoint: {final_path}")
    return 0


def cmd_eval(args) -> int:
    config = _load(args)
    out = _outdir(config)
    agent = None
    if args.assistance == "shared":
        if not os.path.exists(args.checkpoint or ""):
            print(f"checkpoint not found: {args.checkpoint}", file=sys.stderr)
            return RUNTIME_ERROR
        agent = ArbitrationAgent.load(args.checkpoint)
    report = harness.run_eval(
        config,
        agent,
        assistance=args.assistance,
        episodes=args.episodes,
        workers=args.workers,
    )
    path = os.path.join(out, f"eval_{args.assistance}_{report['user_mode']}.json")
    harness.write_report(path, report)
    agg = report["aggregates"]
    print(
        f"{args.assistance}/{report['user_mode']}: "
        f"success {agg['success_count']}/{report['episodes']}, "
        f"travel {agg['travel_mean_cm']:.2f} +- {agg['travel_std_cm']:.2f} cm, "
        f"collision episodes {agg['collision_episodes']}/{report['episodes']}"
    )
    print(f"report: {path}")
    return 0


def cmd_trace(args) -> int:
    config = _load(args)
    out = _outdir(config)
    if not os.path.exists(args.checkpoint):
        print(f"checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return RUNTIME_ERROR
    agent = ArbitrationAgent.load(args.checkpoint)
    rows = harness.run_trace(config, agent, episodes=args.episodes)
    path = os.path.join(out, "trace.csv")
    harness.write_trace_csv(path, rows, config.env.goal_count)
    print(f"trace: {path} ({len(rows)} rows)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load(args)
    agent = None
    if args.checkpoint:
        if not os.path.exists(args.checkpoint):
            print(f"checkpoint not found: {args.checkpoint}", file=sys.stderr)
            return RUNTIME_ERROR
        agent = ArbitrationAgent.load(args.checkpoint)
    port = args.port or config.service.port
    app = create_app(config, agent)
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    except OSError as exc:
        print(f"cannot bind port {port}: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arbiter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    config_cmd = sub.add_parser("config", help="configuration helpers")
    config_sub = config_cmd.add_subparsers(dest="config_command", required=True)
    init = config_sub.add_parser("init", help="emit a config file with every default")
    init.add_argument("--output", default=None)
    init.set_defaults(func=cmd_config_init)

    def common(p, checkpoint_required=False):
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--checkpoint", default=None, required=checkpoint_required)

    pre = sub.add_parser("pretrain", help="supervised pretraining stages")
    common(pre)
    pre.set_defaults(func=cmd_pretrain)

    train = sub.add_parser("train", help="run arbitration training")
    common(train, checkpoint_required=True)
    train.add_argument("--episodes", type=int, default=None)
    train.add_argument("--user", default=None, choices=["noisy0.5", "noisy1.0", "straight", "biased"])
    train.add_argument("--reward-mode", dest="reward_mode", default=None, choices=["combined", "env_only"])
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="matched-seed evaluation rollouts")
    common(ev)
    ev.add_argument("--assistance", choices=["shared", "direct"], required=True)
    ev.add_argument("--episodes", type=int, default=None)
    ev.add_argument("--user", default=None, choices=["noisy0.5", "noisy1.0", "straight", "biased"])
    ev.add_argument("--workers", type=int, default=1)
    ev.set_defaults(func=cmd_eval)

    trace = sub.add_parser("trace", help="per-step arbitration trace CSV")
    common(trace, checkpoint_required=True)
    trace.add_argument("--episodes", type=int, default=None)
    trace.set_defaults(func=cmd_trace)

    serve = sub.add_parser("serve", help="run the live teleoperation service")
    common(serve)
    serve.add_argument("--port", type=int, default=None)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())
