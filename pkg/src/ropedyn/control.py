"""Downstream control: sampling-based MPC toward a goal state, imitation of
observation-only demos via the inverse model, and a nearest-neighbor
imitation baseline.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, asdict

import numpy as np

from . import env as E
from . import models as M
from .autodiff import Tape
from .data import Dataset
from .metrics import geom_error


@dataclass
class PlanConfig:
    horizon: int = 20
    candidates: int = 256
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Demo:
    """Observation-only demonstration: the underlying states are kept for
    metric computation; imitation may only look at rendered observations."""
    states: np.ndarray  # (T+1, G, 2)

    @property
    def length(self) -> int:
        return self.states.shape[0] - 1

    def observations(self, kind: str, cfg: E.EnvConfig) -> list[np.ndarray]:
        return [E.render(s, kind, cfg) for s in self.states]


@dataclass
class EpisodeRecord:
    task: str  # "goal" | "imitation"
    states: np.ndarray   # (H+1, G, 2)
    actions: np.ndarray  # (H, 4)
    final_error: float
    traj_avg_error: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "states": self.states.tolist(),
            "actions": self.actions.tolist(),
            "final_error": self.final_error,
            "traj_avg_error": self.traj_avg_error,
            "meta": self.meta,
        }


def goal_embedding(bundle: M.ModelBundle, goal: np.ndarray, cfg: E.EnvConfig) -> np.ndarray:
    return M.encode_state(bundle, E.render(goal, bundle.obs_kind, cfg))


def plan_step(bundle: M.ModelBundle, state: np.ndarray, goal: np.ndarray,
              cfg: E.EnvConfig, plan: PlanConfig, rng: np.random.Generator,
              goal_emb: np.ndarray | None = None) -> np.ndarray:
    """Sample candidate actions, forward-predict each in embedding space, and
    return the one whose prediction is most cosine-similar to the goal
    embedding.  Ties break to the lowest candidate index."""
    if not bundle.has_forward():
        raise ValueError(f"variant {bundle.variant!r} lacks a forward model; cannot plan")
    if goal_emb is None:
        goal_emb = goal_embedding(bundle, goal, cfg)
    cands = np.stack([E.sample_action(state, rng, cfg) for _ in range(plan.candidates)])

    g = Tape()
    p = M.bind_params(g, bundle)
    obs = E.render(state, bundle.obs_kind, cfg)
    if bundle.obs_kind == "coords":
        obs_node = g.leaf(obs[None, :])
    else:
        obs_node = g.leaf(obs[None, None, :, :])
    h = M.encode_state_g(g, p, bundle, obs_node)            # (1, D)
    tile = g.matmul(g.leaf(np.ones((plan.candidates, 1))), h)  # (M, D)
    act_node = g.leaf(cands)
    z = act_node if bundle.variant == "f" else M.encode_action_g(g, p, bundle, act_node)
    pred = M.forward_predict_g(g, p, bundle, tile, z)       # (M, D)
    scores = g.cos_pairwise(pred, g.leaf(goal_emb[None, :]))  # (M, 1)
    best = int(np.argmax(scores.value[:, 0]))
    return cands[best]


def run_goal_directed(bundle: M.ModelBundle | None, cfg: E.EnvConfig,
                      start: np.ndarray, goal: np.ndarray, plan: PlanConfig,
                      plan_rng: np.random.Generator,
                      env_rng: np.random.Generator | None = None,
                      policy: str = "model") -> EpisodeRecord:
    """Replanning rollout: `horizon` iterations of plan_step + env step.
    policy="random" ignores the model and executes exploration actions."""
    state = start
    states = [start]
    actions = []
    goal_emb = None
    if policy == "model":
        goal_emb = goal_embedding(bundle, goal, cfg)
    for _ in range(plan.horizon):
        if policy == "random":
            a = E.sample_action(state, plan_rng, cfg)
        else:
            a = plan_step(bundle, state, goal, cfg, plan, plan_rng, goal_emb=goal_emb)
        state = E.step(state, a, cfg, env_rng)
        states.append(state)
        actions.append(a)
    errors = [geom_error(s, goal) for s in states[1:]]
    return EpisodeRecord(
        task="goal",
        states=np.asarray(states),
        actions=np.asarray(actions),
        final_error=geom_error(state, goal),
        traj_avg_error=float(np.mean(errors)),
    )


def imitate(bundle: M.ModelBundle, cfg: E.EnvConfig, demo: Demo,
            env_rng: np.random.Generator | None = None) -> EpisodeRecord:
    """Imitation from observation: at each step feed (current state, next demo
    observation) to the inverse model and execute the decoded action.  Demo
    actions are never read.  The trajectory-average error compares each
    post-action state to the corresponding demo state."""
    if not (bundle.has_inverse() and bundle.has_action_codec()):
        raise ValueError(f"variant {bundle.variant!r} lacks an inverse model; cannot imitate")
    demo_obs = demo.observations(bundle.obs_kind, cfg)
    demo_emb = np.stack([M.encode_state(bundle, o) for o in demo_obs])
    state = demo.states[0]
    states = [state]
    actions = []
    for t in range(demo.length):
        h_t = M.encode_state(bundle, E.render(state, bundle.obs_kind, cfg))
        z = M.inverse_predict(bundle, h_t, demo_emb[t + 1])
        a = M.decode_action(bundle, z)
        state = E.step(state, a, cfg, env_rng)
        states.append(state)
        actions.append(a)
    errors = [geom_error(states[t], demo.states[t]) for t in range(1, demo.length + 1)]
    return EpisodeRecord(
        task="imitation",
        states=np.asarray(states),
        actions=np.asarray(actions),
        final_error=geom_error(states[-1], demo.states[-1]),
        traj_avg_error=float(np.mean(errors)),
    )


# -- nearest-neighbor imitation baseline -------------------------------------

def _pack(img: np.ndarray) -> np.ndarray:
    return np.packbits(img.reshape(-1) > 0.5)


def _hamming(bits: np.ndarray, query: np.ndarray) -> np.ndarray:
    x = np.bitwise_xor(bits, query)
    return np.bitwise_count(x.view(np.uint64)).sum(axis=1, dtype=np.int64)


class NearestNeighborBank:
    """Training transitions indexed by raster observations.  Rasters are
    binary, so squared pixel distance equals Hamming distance on packed bits."""

    def __init__(self, ds: Dataset, train_only: bool = True):
        idx = np.nonzero(ds.train_mask)[0] if train_only else np.arange(len(ds))
        if idx.size == 0:
            raise ValueError("empty dataset for nearest-neighbor baseline")
        self.actions = ds.actions[idx]
        self.bits_t = np.stack([_pack(E.render(ds.states_t[k], "raster", ds.env)) for k in idx])
        self.bits_t1 = np.stack([_pack(E.render(ds.states_t1[k], "raster", ds.env)) for k in idx])

    def query(self, obs_s: np.ndarray, obs_d: np.ndarray) -> np.ndarray:
        """Action of the transition minimizing |o(s_t)-o(s_t^j)|^2 +
        |o(d_{t+1})-o(s_{t+1}^j)|^2; ties break to the lowest index."""
        dist = _hamming(self.bits_t, _pack(obs_s)) + _hamming(self.bits_t1, _pack(obs_d))
        return self.actions[int(np.argmin(dist))]


def nn_baseline_action(ds: Dataset, obs_s: np.ndarray, obs_d: np.ndarray) -> np.ndarray:
    """One-shot nearest-neighbor query (builds the bank; prefer
    NearestNeighborBank for repeated queries)."""
    return NearestNeighborBank(ds).query(obs_s, obs_d)


def imitate_nearest(bank: NearestNeighborBank, cfg: E.EnvConfig, demo: Demo,
                    env_rng: np.random.Generator | None = None) -> EpisodeRecord:
    """Imitation loop driven by nearest-neighbor action lookup on rasters."""
    demo_obs = demo.observations("raster", cfg)
    state = demo.states[0]
    states = [state]
    actions = []
    for t in range(demo.length):
        a = bank.query(E.render(state, "raster", cfg), demo_obs[t + 1])
        state = E.step(state, a, cfg, env_rng)
        states.append(state)
        actions.append(a)
    errors = [geom_error(states[t], demo.states[t]) for t in range(1, demo.length + 1)]
    return EpisodeRecord(
        task="imitation",
        states=np.asarray(states),
        actions=np.asarray(actions),
        final_error=geom_error(states[-1], demo.states[-1]),
        traj_avg_error=float(np.mean(errors)),
    )


# -- demo generation ----------------------------------------------------------

def make_demo(cfg: E.EnvConfig, rng: np.random.Generator, kind: str,
              length: int = 20) -> Demo:
    """Scripted demonstration: from a random reset, repeatedly pick the geom
    farthest from its slot in a target shape and move it toward that slot,
    with the drop displacement capped at 12 px so demo actions stay inside the
    exploration action distribution.  Recorded with deterministic stepping."""
    det = dataclasses.replace(cfg, mode="deterministic")
    state = E.reset(det, rng)
    if kind == "straight":
        goal = E.straight_chain(det)
    else:
        goal = E.make_goal(kind, rng, det, center=state.mean(axis=0))
    # fix the better chain orientation once, so the script is consistent
    fwd = np.mean(np.linalg.norm(state - goal, axis=1))
    rev = np.mean(np.linalg.norm(state - goal[::-1], axis=1))
    if rev < fwd:
        goal = goal[::-1]
    states = [state]
    for _ in range(length):
        dev = np.linalg.norm(state - goal, axis=1)
        i = int(np.argmax(dev))
        delta = goal[i] - state[i]
        dist = float(np.linalg.norm(delta))
        if dist > 12.0:
            delta = delta * (12.0 / dist)
        action = np.concatenate([state[i], state[i] + delta])
        hi = np.nextafter(float(det.image_size), 0.0)
        action = np.clip(action, 0.0, hi)
        state = E.step(state, action, det, None)
        states.append(state)
    return Demo(states=np.asarray(states))
