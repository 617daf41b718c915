"""Transition datasets: random-exploration collection and a line-delimited
text format.

One line per transition: trajectory id, step index, the flattened geom
coordinates of s_t, the 4 action components, and the coordinates of s_{t+1},
each real printed as its shortest round-trip decimal.  Rasters are never
stored; observations are re-rendered from coordinates.  The train/test split
assigns the first 75% of trajectories (by id order) to train.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import env as E
from .rng import child_rng

FORMAT_TOKEN = "ropedyn-dataset"
FORMAT_VERSION = 1
TRAIN_FRACTION = 0.75


@dataclass
class Dataset:
    env: E.EnvConfig
    traj_ids: np.ndarray   # (M,) int64
    steps: np.ndarray      # (M,) int64
    states_t: np.ndarray   # (M, G, 2)
    actions: np.ndarray    # (M, 4)
    states_t1: np.ndarray  # (M, G, 2)

    def __len__(self) -> int:
        return int(self.traj_ids.shape[0])

    @property
    def next_actions(self) -> np.ndarray:
        """Action taken at the following step of the same trajectory; the last
        transition of a trajectory reuses its own action."""
        nxt = self.actions.copy()
        if len(self) > 1:
            contiguous = (self.traj_ids[1:] == self.traj_ids[:-1]) & (self.steps[1:] == self.steps[:-1] + 1)
            idx = np.nonzero(contiguous)[0]
            nxt[idx] = self.actions[idx + 1]
        return nxt

    def _train_traj_cut(self) -> int:
        ids = np.unique(self.traj_ids)
        return int(math.ceil(TRAIN_FRACTION * ids.shape[0]))

    @property
    def train_mask(self) -> np.ndarray:
        ids = np.unique(self.traj_ids)
        train_ids = set(ids[: self._train_traj_cut()].tolist())
        return np.array([t in train_ids for t in self.traj_ids.tolist()], dtype=bool)

    @property
    def test_mask(self) -> np.ndarray:
        return ~self.train_mask if len(self) else np.zeros(0, dtype=bool)


def collect_dataset(cfg: E.EnvConfig, trajectories: int, length: int, seed: int) -> Dataset:
    """Random-exploration rollouts: reset, then `length` sampled actions each.
    One child rng per trajectory, so any subset reproduces in isolation."""
    traj_ids, steps, s_t, acts, s_t1 = [], [], [], [], []
    for ti in range(trajectories):
        rng = child_rng(seed, "trajectory", ti)
        state = E.reset(cfg, rng)
        for si in range(length):
            a = E.sample_action(state, rng, cfg)
            nxt = E.step(state, a, cfg, rng)
            traj_ids.append(ti)
            steps.append(si)
            s_t.append(state)
            acts.append(a)
            s_t1.append(nxt)
            state = nxt
    g = cfg.geom_count
    return Dataset(
        env=cfg,
        traj_ids=np.asarray(traj_ids, dtype=np.int64),
        steps=np.asarray(steps, dtype=np.int64),
        states_t=np.asarray(s_t, dtype=np.float64).reshape(-1, g, 2),
        actions=np.asarray(acts, dtype=np.float64).reshape(-1, 4),
        states_t1=np.asarray(s_t1, dtype=np.float64).reshape(-1, g, 2),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: Dataset, path) -> None:
    env_json = json.dumps(ds.env.to_dict(), sort_keys=True, separators=(",", ":"))
    with open(path, "w") as f:
        f.write(f"{FORMAT_TOKEN} v{FORMAT_VERSION} geoms={ds.env.geom_count} env={env_json}\n")
        for k in range(len(ds)):
            fields = [str(int(ds.traj_ids[k])), str(int(ds.steps[k]))]
            fields += [_fmt(v) for v in ds.states_t[k].reshape(-1)]
            fields += [_fmt(v) for v in ds.actions[k]]
            fields += [_fmt(v) for v in ds.states_t1[k].reshape(-1)]
            f.write(" ".join(fields) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as f:
        header = f.readline().rstrip("\n")
        prefix = f"{FORMAT_TOKEN} v{FORMAT_VERSION} "
        if not header.startswith(prefix):
            raise ValueError(f"unsupported dataset header: {header[:60]!r}")
        rest = header[len(prefix):]
        geom_part, env_part = rest.split(" env=", 1)
        geoms = int(geom_part.removeprefix("geoms="))
        cfg = E.EnvConfig(**json.loads(env_part))
        if cfg.geom_count != geoms:
            raise ValueError("geom count disagrees with env config")
        n_fields = 2 + 2 * geoms + 4 + 2 * geoms
        traj_ids, steps, s_t, acts, s_t1 = [], [], [], [], []
        for lineno, line in enumerate(f, start=2):
            parts = line.split()
            if len(parts) != n_fields:
                raise ValueError(f"line {lineno}: expected {n_fields} fields, got {len(parts)}")
            try:
                traj_ids.append(int(parts[0]))
                steps.append(int(parts[1]))
                vals = [float(v) for v in parts[2:]]
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            s_t.append(vals[: 2 * geoms])
            acts.append(vals[2 * geoms : 2 * geoms + 4])
            s_t1.append(vals[2 * geoms + 4 :])
    m = len(traj_ids)
    return Dataset(
        env=cfg,
        traj_ids=np.asarray(traj_ids, dtype=np.int64),
        steps=np.asarray(steps, dtype=np.int64),
        states_t=np.asarray(s_t, dtype=np.float64).reshape(m, geoms, 2),
        actions=np.asarray(acts, dtype=np.float64).reshape(m, 4),
        states_t1=np.asarray(s_t1, dtype=np.float64).reshape(m, geoms, 2),
    )
