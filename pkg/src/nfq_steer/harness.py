"""Experiment commands behind the CLI.

Every command takes a :class:`~nfq_steer.config.RunConfig`, writes its files
under ``config.out`` and returns an in-memory result, so the commands can be
driven from Python as well as from the command line.  No file contains
timestamps or timings, which keeps reruns byte-identical.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .env import Kind
from .errors import ConfigurationError, InputError, TrainingDivergedError
from .net import load_checkpoint, save_checkpoint
from .nfq import Episode, greedy_action, random_action, run_episode, train_loop
from .physics import PhysicsEnv, reset_env
from .records import (EpisodeMetrics, TrajectoryDump, read_metrics, write_metrics,
                      write_trajectories, write_transition_log)
from .replay import ReplayEnv, build_from_log

log = logging.getLogger(__name__)

# SeedSequence spawn-key streams (0 and 1 are used by the training loop)
STREAM_COLLECT = 2
STREAM_EVAL = 3
STREAM_COMPARE = 4
STREAM_COMPARE_POLICY = 5


def _rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def physics_env(config: RunConfig) -> PhysicsEnv:
    return PhysicsEnv(config.motor, config.regions, config.costs, config.init)


def replay_env(config: RunConfig, dataset=None) -> ReplayEnv:
    path = Path(dataset) if dataset else config.require_dataset()
    tset = build_from_log(path, config.regions, config.costs, config.replay.weights,
                          config.replay.match_action)
    log.info("replay set: %d transitions from %s", len(tset), path)
    return ReplayEnv(tset, config.regions, config.costs, config.init)


def make_env(config: RunConfig):
    return replay_env(config) if config.env == "replay" else physics_env(config)


# -- summaries -----------------------------------------------------------------

def quarter_bounds(n: int) -> list[tuple[int, int]]:
    """Split ``n`` episodes into four contiguous ``[start, stop)`` blocks."""
    edges = [round(i * n / 4) for i in range(5)]
    return list(zip(edges[:-1], edges[1:]))


def quarter_stats(metrics: list[EpisodeMetrics]) -> list[dict]:
    rows = []
    for q, (lo, hi) in enumerate(quarter_bounds(len(metrics)), start=1):
        block = metrics[lo:hi]
        rows.append({
            "quarter": q,
            "first_episode": block[0].episode if block else None,
            "last_episode": block[-1].episode if block else None,
            "successes": sum(m.success for m in block),
            "mean_cost": float(np.mean([m.total_cost for m in block])) if block else None,
        })
    return rows


def moving_average(values, window: int = 20) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise InputError("window must be >= 1")
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def summarize(metrics: list[EpisodeMetrics]) -> dict:
    quarters = quarter_stats(metrics)
    return {
        "episodes": len(metrics),
        "successes": sum(m.success for m in metrics),
        "terminated": sum(m.terminated for m in metrics),
        "total_steps": sum(m.steps for m in metrics),
        "resets": [m.episode for m in metrics if m.reset],
        "quarters": quarters,
        "first_quarter_mean_cost": quarters[0]["mean_cost"],
        "last_quarter_mean_cost": quarters[-1]["mean_cost"],
        "last_100_successes": sum(m.success for m in metrics[-100:]),
    }


# -- collect -------------------------------------------------------------------

def collect_transitions(config: RunConfig, n_steps: int):
    """Random-action physics episodes until exactly ``n_steps`` transitions exist.

    Yields ``(episode, t, transition)``; episodes are numbered from 0.
    """
    if n_steps < 1:
        raise InputError("n_steps must be >= 1")
    env = physics_env(config)
    count, episode = 0, 0
    while count < n_steps:
        rng = _rng(config.seed, STREAM_COLLECT, episode)
        ep = run_episode(env, None, config.nfq, rng, policy=lambda s, r: random_action(r),
                         episode=episode)
        for t, tr in enumerate(ep.transitions):
            if count == n_steps:
                break
            yield episode, t, tr
            count += 1
        episode += 1


def cmd_collect(config: RunConfig, n_steps: int = 10_000, path=None) -> Path:
    if n_steps < 1:
        raise InputError("n_steps must be >= 1")
    path = Path(path) if path else _out_dir(config) / "transitions.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    n = write_transition_log(path, collect_transitions(config, n_steps))
    log.info("wrote %d transitions to %s", n, path)
    return path


# -- train ---------------------------------------------------------------------

@dataclass
class TrainOutcome:
    metrics: list
    summary: dict
    metrics_path: Path
    summary_path: Path
    checkpoints: list = field(default_factory=list)
    result: object = None


def cmd_train(config: RunConfig) -> TrainOutcome:
    env = make_env(config)
    out = _out_dir(config)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    checkpoints = []
    collected: list[EpisodeMetrics] = []

    def on_checkpoint(tag, episode, net, opt):
        p = ckpt_dir / f"{tag}-ep{episode:04d}.json"
        save_checkpoint(p, net, opt, tag=tag, episode=episode, env=config.env,
                        seed=config.seed)
        checkpoints.append(p)

    result, aborted = None, None
    try:
        result = train_loop(env, config.nfq, checkpoint_hook=on_checkpoint,
                            episode_hook=lambda ep: collected.append(ep.metrics))
    except TrainingDivergedError as exc:
        aborted = {"episode": exc.episode, "message": str(exc)}
    metrics = result.metrics if result is not None else collected
    metrics_path = write_metrics(out / "metrics.csv", metrics)
    summary = summarize(metrics) if metrics else {"episodes": 0}
    summary.update({"env": config.env, "profile": config.profile, "seed": config.seed,
                    "aborted": aborted,
                    "checkpoints": [p.name for p in checkpoints]})
    summary_path = _write_json(out / "summary.json", summary)
    _write_json(out / "config.json", config.to_dict())
    outcome = TrainOutcome(metrics, summary, metrics_path, summary_path, checkpoints, result)
    if aborted is not None:
        raise TrainingDivergedError(f"training aborted: {aborted['message']}", aborted["episode"])
    return outcome


# -- eval ----------------------------------------------------------------------

def steps_to_goal(dump: TrajectoryDump) -> Optional[int]:
    """Steps until the state first enters the goal region, or None."""
    for i, k in enumerate(dump.kinds):
        if k is Kind.GOAL:
            return i + 1
    return None


def _episode_dump(ep: Episode, index: int, label: str) -> TrajectoryDump:
    return TrajectoryDump.from_transitions(index, ep.start, ep.transitions, label)


def cmd_eval(checkpoint, config: RunConfig, n_episodes: int = 100) -> dict:
    if n_episodes < 1:
        raise InputError("n_episodes must be >= 1")
    net, _, meta = load_checkpoint(checkpoint)
    if tuple(net.spec.sizes) != tuple(config.nfq.sizes):
        raise ConfigurationError(
            f"checkpoint layer sizes {list(net.spec.sizes)} do not match config "
            f"{list(config.nfq.sizes)}")
    env = make_env(config)
    out = _out_dir(config)
    dumps, outcomes = [], []
    for i in range(n_episodes):
        ep = run_episode(env, net, config.nfq, _rng(config.seed, STREAM_EVAL, i), epsilon=0.0,
                         episode=i)
        dumps.append(_episode_dump(ep, i, env.name))
        outcomes.append(ep)
    to_goal = [steps_to_goal(d) for d, ep in zip(dumps, outcomes) if ep.metrics.success]
    report = {
        "checkpoint": str(checkpoint),
        "env": config.env,
        "episodes": n_episodes,
        "successes": sum(ep.metrics.success for ep in outcomes),
        "success_rate": sum(ep.metrics.success for ep in outcomes) / n_episodes,
        "mean_cost": float(np.mean([ep.metrics.total_cost for ep in outcomes])),
        "mean_steps": float(np.mean([ep.metrics.steps for ep in outcomes])),
        "mean_steps_to_goal": float(np.mean(to_goal)) if to_goal else None,
        "outcomes": {k: sum(ep.outcome == k for ep in outcomes)
                     for k in ("success", "failure", "timeout")},
    }
    write_trajectories(out / "eval_trajectories.csv", dumps)
    _write_json(out / "eval_report.json", report)
    return report


# -- compare -------------------------------------------------------------------

def cmd_compare(config: RunConfig, n: int = 100, checkpoint=None, dataset=None) -> dict:
    """Roll the same policy out from the same initial states in both simulators."""
    if n < 1:
        raise InputError("n must be >= 1")
    envs = [physics_env(config), replay_env(config, dataset)]
    net = None
    if checkpoint is not None:
        net, _, _ = load_checkpoint(checkpoint)
    out = _out_dir(config)
    report = {"episodes": n, "policy": "checkpoint" if net is not None else "random"}
    dumps_by_env = {}
    for env in envs:
        dumps, counts = [], {"success": 0, "failure": 0, "timeout": 0, "lookup_failures": 0}
        for i in range(n):
            start = reset_env(config.init, _rng(config.seed, STREAM_COMPARE, i))
            act_rng = _rng(config.seed, STREAM_COMPARE_POLICY, i)
            if net is None:
                policy = lambda s, r, act_rng=act_rng: random_action(act_rng)
            else:
                policy = lambda s, r: greedy_action(net, s, config.regions)
            ep = run_episode(env, None, config.nfq, _rng(config.seed, STREAM_COMPARE, i),
                             start=start, policy=policy, episode=i)
            counts[ep.outcome] += 1
            counts["lookup_failures"] += int(ep.lookup_failed)
            dumps.append(_episode_dump(ep, i, env.name))
        write_trajectories(out / f"compare_{env.name}.csv", dumps)
        dumps_by_env[env.name] = dumps
        report[env.name] = counts
    _write_json(out / "compare_summary.json", report)
    report["dumps"] = dumps_by_env
    return report


# -- export-plots --------------------------------------------------------------

def cmd_export_plots(metrics_path, out_dir=None, window: int = 20) -> tuple[Path, Path]:
    metrics = read_metrics(metrics_path)
    if not metrics:
        raise InputError(f"{metrics_path}: no metrics rows")
    out = Path(out_dir) if out_dir else Path(metrics_path).parent
    out.mkdir(parents=True, exist_ok=True)
    costs = [m.total_cost for m in metrics]
    avg = moving_average(costs, window)
    series = out / "cost_series.csv"
    with series.open("w") as fh:
        fh.write("episode,total_cost,moving_average,success,reset\n")
        for m, a in zip(metrics, avg):
            fh.write(f"{m.episode},{m.total_cost!r},{float(a)!r},{int(m.success)},{int(m.reset)}\n")
    table = out / "quarters.csv"
    with table.open("w") as fh:
        fh.write("quarter,first_episode,last_episode,successes,mean_cost\n")
        for q in quarter_stats(metrics):
            fh.write(f"{q['quarter']},{q['first_episode']},{q['last_episode']},"
                     f"{q['successes']},{q['mean_cost']!r}\n")
    return series, table
