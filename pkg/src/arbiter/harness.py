"""Batch orchestration: training metrics files, Table-style evaluation
reports over matched seeds, and per-step trace export for re-plotting the
arbitration behavior."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .agent import ArbitrationAgent
from .config import RunConfig, config_as_dict
from .training import EpisodeRecord, evaluation_episode


def moving_average(values: list[float], window: int = 10) -> list[float]:
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(float(np.mean(values[lo : i + 1])))
    return out


def write_metrics_jsonl(path: str, metrics: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in metrics:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _record_to_dict(record: EpisodeRecord, episode_index: int) -> dict:
    return {
        "episode": episode_index,
        "env_seed": record.env_seed,
        "true_goal": record.true_goal,
        "goal_reached": record.goal_reached,
        "success": record.success,
        "steps": record.steps,
        "travel_cm": record.travel_cm,
        "collision_steps": record.collision_steps,
        "boundary_steps": record.boundary_steps,
        "l2_user_trace": [row["l2_user"] for row in record.step_rows],
        "l2_predicted_trace": [row["l2_predicted"] for row in record.step_rows],
    }


def _eval_one(args) -> EpisodeRecord:
    config, agent, index, assistance, user_mode = args
    return evaluation_episode(
        config, agent, index, assistance=assistance, user_mode=user_mode, record_steps=True
    )


def run_eval(
    config: RunConfig,
    agent: ArbitrationAgent | None,
    assistance: str,
    episodes: int | None = None,
    user_mode: str | None = None,
    workers: int = 1,
) -> dict:
    """Evaluation report: per-episode records plus recomputable aggregates.

    Matched seeds: episode i sees the same scene and user regardless of the
    assistance arm, so comparisons are paired.
    """
    episodes = episodes or config.run.eval_episodes
    jobs = [(config, agent, i, assistance, user_mode) for i in range(episodes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_eval_one, jobs))
    else:
        records = [_eval_one(job) for job in jobs]

    travel = [r.travel_cm for r in records]
    report = {
        "assistance": assistance,
        "user_mode": user_mode or config.user.mode,
        "episodes": episodes,
        "records": [_record_to_dict(r, i) for i, r in enumerate(records)],
        "aggregates": {
            "success_count": sum(1 for r in records if r.success),
            "collision_episodes": sum(1 for r in records if r.collision_steps > 0),
            "collision_steps_total": sum(r.collision_steps for r in records),
            "travel_mean_cm": float(np.mean(travel)),
            "travel_std_cm": float(np.std(travel)),
            "steps_mean": float(np.mean([r.steps for r in records])),
        },
        "config": config_as_dict(config),
    }
    return report


def write_report(path: str, report: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")


TRACE_FIELDS = ("episode", "t_norm", "l2_user", "l2_predicted", "modality", "obstacle_dist")


def run_trace(
    config: RunConfig,
    agent: ArbitrationAgent,
    episodes: int | None = None,
    user_mode: str | None = None,
) -> list[dict]:
    """Per-step rows over shared-control rollouts, enough to re-plot the
    authority handover curves."""
    episodes = episodes or config.run.eval_episodes
    rows: list[dict] = []
    goal_count = config.env.goal_count
    for index in range(episodes):
        record = evaluation_episode(
            config, agent, index, assistance="shared", user_mode=user_mode, record_steps=True
        )
        for step_row in record.step_rows:
            row = {"episode": index}
            row.update({k: step_row[k] for k in TRACE_FIELDS if k in step_row})
            for g in range(goal_count):
                row[f"score_{g}"] = step_row["scores"][g]
            rows.append(row)
    return rows


def write_trace_csv(path: str, rows: list[dict], goal_count: int) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fieldnames = list(TRACE_FIELDS) + [f"score_{g}" for g in range(goal_count)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in fieldnames})
