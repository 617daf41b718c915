"""Experiment suites: methods x env modes x goal kinds x seeds, with paired
episode draws so every method faces byte-identical starts, goals/demos, and
noise sequences."""

from __future__ import annotations

from dataclasses import dataclass, field, replace, asdict

import numpy as np

from . import control as C
from . import env as E
from . import models as M
from .metrics import success
from .rng import child_rng


@dataclass
class Method:
    name: str
    kind: str  # "model" | "random" | "nearest"
    bundle: M.ModelBundle | None = None
    bank: C.NearestNeighborBank | None = None

    def __post_init__(self):
        if self.kind not in ("model", "random", "nearest"):
            raise ValueError(f"unknown method kind {self.kind!r}")
        if self.kind == "model" and self.bundle is None:
            raise ValueError(f"method {self.name!r} needs a bundle")
        if self.kind == "nearest" and self.bank is None:
            raise ValueError(f"method {self.name!r} needs a dataset bank")


@dataclass
class SuiteConfig:
    task: str = "goal"  # "goal" | "imitation"
    env_modes: list = field(default_factory=lambda: ["deterministic"])
    goal_kinds: list = field(default_factory=lambda: ["straight"])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    episodes: int = 50
    demo_length: int = 20

    def __post_init__(self):
        if self.task not in ("goal", "imitation"):
            raise ValueError(f"unknown task {self.task!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricRow:
    """One method x env mode x goal kind cell, aggregated over seeds."""
    method: str
    env_mode: str
    goal_kind: str
    success_rate: float      # mean over seeds
    success_std: float
    mean_geom_error: float   # mean over seeds
    episodes: int            # per seed
    per_seed: list           # dicts: seed, episodes, successes, success_rate, mean_geom_error


def episode_inputs(task: str, env_cfg: E.EnvConfig, goal_kind: str, seed: int,
                   episode: int, demo_length: int = 20):
    """Start/goal (or demo) for one paired episode; independent of method and
    of env mode, so comparisons across both are paired."""
    det = replace(env_cfg, mode="deterministic")
    if task == "goal":
        start = E.reset(det, child_rng(seed, f"start/{goal_kind}", episode))
        if goal_kind == "straight":
            goal = E.straight_chain(det)
        else:
            # shaped targets form near the rope's current position, keeping
            # them reachable within the planning horizon
            goal = E.make_goal(goal_kind, child_rng(seed, f"goal/{goal_kind}", episode),
                               det, center=start.mean(axis=0))
        return start, goal
    demo = C.make_demo(det, child_rng(seed, f"demo/{goal_kind}", episode),
                       goal_kind, demo_length)
    return demo


def run_cell(method: Method, task: str, env_cfg: E.EnvConfig, goal_kind: str,
             seed: int, episodes: int, plan: C.PlanConfig, demo_length: int = 20,
             keep_records: bool = False):
    """All episodes for one (method, env mode, goal kind, seed) cell."""
    n_success = 0
    errors = []
    records = []
    for ep in range(episodes):
        env_rng = child_rng(seed, f"noise/{goal_kind}", ep)
        act_rng = child_rng(seed, f"actor/{goal_kind}", ep)
        if task == "goal":
            start, goal = episode_inputs(task, env_cfg, goal_kind, seed, ep, demo_length)
            if method.kind == "random":
                rec = C.run_goal_directed(None, env_cfg, start, goal, plan,
                                          act_rng, env_rng, policy="random")
            else:
                rec = C.run_goal_directed(method.bundle, env_cfg, start, goal, plan,
                                          act_rng, env_rng)
            errors.append(rec.final_error)
        else:
            demo = episode_inputs(task, env_cfg, goal_kind, seed, ep, demo_length)
            if method.kind == "nearest":
                rec = C.imitate_nearest(method.bank, env_cfg, demo, env_rng)
            else:
                rec = C.imitate(method.bundle, env_cfg, demo, env_rng)
            errors.append(rec.traj_avg_error)
        if success(rec, task):
            n_success += 1
        if keep_records:
            records.append(rec)
    out = {
        "seed": seed,
        "episodes": episodes,
        "successes": n_success,
        "success_rate": n_success / episodes,
        "mean_geom_error": float(np.mean(errors)),
    }
    return (out, records) if keep_records else out


def evaluate(methods: list[Method], suite: SuiteConfig, env_cfg: E.EnvConfig,
             plan: C.PlanConfig, log=None):
    """Run the full grid.  Returns (per-seed rows for the CSV, aggregated
    MetricRow list)."""
    per_seed_rows = []
    aggregates = []
    for method in methods:
        for mode in suite.env_modes:
            cfg = replace(env_cfg, mode=mode)
            for kind in suite.goal_kinds:
                cells = []
                for seed in suite.seeds:
                    cell = run_cell(method, suite.task, cfg, kind, seed,
                                    suite.episodes, plan, suite.demo_length)
                    row = {"method": method.name, "env_mode": mode, "goal_kind": kind, **cell}
                    per_seed_rows.append(row)
                    cells.append(cell)
                    if log:
                        log(f"{method.name:24s} {mode:13s} {kind:8s} seed={seed} "
                            f"success={cell['success_rate']:.2f} err={cell['mean_geom_error']:.2f}")
                rates = np.array([c["success_rate"] for c in cells])
                aggregates.append(MetricRow(
                    method=method.name, env_mode=mode, goal_kind=kind,
                    success_rate=float(rates.mean()),
                    success_std=float(rates.std()),
                    mean_geom_error=float(np.mean([c["mean_geom_error"] for c in cells])),
                    episodes=suite.episodes,
                    per_seed=cells,
                ))
    return per_seed_rows, aggregates
