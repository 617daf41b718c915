"""2D rope as a chain of point geoms manipulated by pick-and-place actions.

The rope is an ordered chain of geoms (default 25) inside a square image
(default 64x64 px).  An action (x1, y1, x2, y2) grabs the geom nearest the
pick point (x1, y1), a no-op if none is within the pick radius, and drops
it at (x2, y2).  The rest of the chain follows leader-style: walking outward
from the moved geom, any neighbor stretched beyond the rest length is pulled
onto the segment toward its predecessor at exactly the rest length.  In
stochastic mode, i.i.d. Gaussian noise is added to every geom coordinate
after the action, followed by one more projection pass.

States are (geom_count, 2) float64 arrays; actions are (4,) arrays; all
coordinates live in [0, image_size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

import numpy as np

GOAL_KINDS = ("straight", "c", "l", "s")


@dataclass
class EnvConfig:
    mode: str = "deterministic"  # or "stochastic"
    noise_sigma: float = 0.5
    pick_radius: float = 5.0
    rest_length: float = 2.0
    image_size: int = 64
    geom_count: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown env mode {self.mode!r}")
        if self.noise_sigma < 0 or self.pick_radius <= 0 or self.rest_length <= 0:
            raise ValueError("invalid env config")

    def to_dict(self) -> dict:
        return asdict(self)


def _hi(cfg: EnvConfig) -> float:
    # coordinates live in [0, image_size); clamp just below the open bound
    return np.nextafter(float(cfg.image_size), 0.0)


def _clamp(state: np.ndarray, cfg: EnvConfig) -> np.ndarray:
    return np.clip(state, 0.0, _hi(cfg))


def straight_chain(cfg: EnvConfig) -> np.ndarray:
    """Horizontal chain at rest spacing, centered in the image."""
    n = cfg.geom_count
    half = (n - 1) * cfg.rest_length / 2.0
    c = cfg.image_size / 2.0
    xs = c - half + cfg.rest_length * np.arange(n)
    ys = np.full(n, c)
    return np.stack([xs, ys], axis=1)


def reset(cfg: EnvConfig, rng: np.random.Generator, burn_in: int = 10) -> np.ndarray:
    """Straight centered chain perturbed by `burn_in` random actions
    (deterministic stepping)."""
    state = straight_chain(cfg)
    det = replace(cfg, mode="deterministic")
    for _ in range(burn_in):
        state = step(state, sample_action(state, rng, det), det, rng=None)
    return state


def _project_pass(state: np.ndarray, anchor: int, l0: float) -> np.ndarray:
    """Follow-the-leader: walking outward from `anchor`, pull any overstretched
    geom onto the segment toward its (already settled) predecessor."""
    out = state.copy()
    n = out.shape[0]
    for i in range(anchor + 1, n):
        d = out[i] - out[i - 1]
        dist = math.hypot(d[0], d[1])
        if dist > l0:
            out[i] = out[i - 1] + d * (l0 / dist)
    for i in range(anchor - 1, -1, -1):
        d = out[i] - out[i + 1]
        dist = math.hypot(d[0], d[1])
        if dist > l0:
            out[i] = out[i + 1] + d * (l0 / dist)
    return out


def step(state: np.ndarray, action: np.ndarray, cfg: EnvConfig,
         rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply one pick-and-place action.  Deterministic mode never touches rng."""
    action = np.asarray(action, dtype=np.float64)
    pick = action[:2]
    drop = action[2:]
    d2 = np.sum((state - pick) ** 2, axis=1)
    nearest = int(np.argmin(d2))
    picked = d2[nearest] <= cfg.pick_radius**2

    out = state
    if picked:
        out = state.copy()
        out[nearest] = drop
        out = _project_pass(out, nearest, cfg.rest_length)
        out = _clamp(out, cfg)

    if cfg.mode == "stochastic" and cfg.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("stochastic step needs an rng")
        out = out + rng.normal(0.0, cfg.noise_sigma, size=out.shape)
        out = _project_pass(out, nearest, cfg.rest_length)
        out = _clamp(out, cfg)
    return out


def render(state: np.ndarray, kind: str, cfg: EnvConfig | None = None) -> np.ndarray:
    """Observation from a state.

    coords: geom positions / image_size, flattened -> (2*geom_count,)
    raster: grayscale grid, each geom a filled disk of radius 1.5 px,
            intensity 1.0 on background 0.0, no anti-aliasing.
    """
    size = cfg.image_size if cfg is not None else 64
    if kind == "coords":
        return (state / float(size)).reshape(-1)
    if kind == "raster":
        img = np.zeros((size, size), dtype=np.float64)
        r = 1.5
        for gx, gy in state:
            x0, x1 = max(0, int(math.ceil(gx - r))), min(size - 1, int(math.floor(gx + r)))
            y0, y1 = max(0, int(math.ceil(gy - r))), min(size - 1, int(math.floor(gy + r)))
            for ix in range(x0, x1 + 1):
                for iy in range(y0, y1 + 1):
                    if (ix - gx) ** 2 + (iy - gy) ** 2 <= r * r:
                        img[iy, ix] = 1.0
        return img
    raise ValueError(f"unknown observation kind {kind!r}")


def sample_action(state: np.ndarray, rng: np.random.Generator,
                  cfg: EnvConfig) -> np.ndarray:
    """Exploration action: pick near a uniformly chosen geom (jitter in
    [-2, 2]^2), drop at a uniform-angle displacement with magnitude in
    [2, 12] px; everything clamped in-bounds."""
    g = int(rng.integers(0, state.shape[0]))
    jitter = rng.uniform(-2.0, 2.0, size=2)
    pick = state[g] + jitter
    mag = rng.uniform(2.0, 12.0)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    drop = pick + mag * np.array([math.cos(ang), math.sin(ang)])
    hi = _hi(cfg)
    return np.clip(np.concatenate([pick, drop]), 0.0, hi)


# -- goal templates ---------------------------------------------------------

def _dense_polyline(kind: str, total_len: float, n_dense: int = 6000) -> np.ndarray:
    """Dense polyline tracing the template shape, arc length >= total_len."""
    s = np.linspace(0.0, total_len, n_dense)
    ds = total_len / (n_dense - 1)
    if kind == "straight":
        heading = np.zeros(n_dense)
    elif kind == "c":
        # ~240 degree arc
        sweep = 4.0 * math.pi / 3.0
        heading = s * (sweep / total_len)
    elif kind == "l":
        # right angle at the midpoint
        heading = np.where(s < total_len / 2.0, 0.0, math.pi / 2.0)
    elif kind == "s":
        # two opposing arcs, ~150 degrees each
        sweep = 5.0 * math.pi / 6.0
        half = total_len / 2.0
        heading = np.where(
            s < half,
            s * (sweep / half),
            sweep - (s - half) * (sweep / half),
        )
    else:
        raise ValueError(f"unsupported goal kind {kind!r}")
    steps = np.stack([np.cos(heading), np.sin(heading)], axis=1) * ds
    pts = np.vstack([[0.0, 0.0], np.cumsum(steps[:-1], axis=0)])
    return pts


def _chord_resample(poly: np.ndarray, n: int, l0: float) -> np.ndarray:
    """Place n points along the polyline so consecutive points sit at Euclidean
    distance exactly l0 (circle/segment intersection marching)."""
    pts = [poly[0].copy()]
    cur = poly[0]
    seg = 0
    for _ in range(n - 1):
        while seg < len(poly) - 1 and np.linalg.norm(poly[seg + 1] - cur) < l0:
            seg += 1
        if seg >= len(poly) - 1:
            raise ValueError("template too short for chord resampling")
        a, b = poly[seg], poly[seg + 1]
        d = b - a
        f = a - cur
        qa = float(d @ d)
        qb = 2.0 * float(f @ d)
        qc = float(f @ f) - l0 * l0
        disc = max(qb * qb - 4.0 * qa * qc, 0.0)
        t = min(max((-qb + math.sqrt(disc)) / (2.0 * qa), 0.0), 1.0)
        cur = a + t * d
        pts.append(cur)
    return np.asarray(pts)


def make_goal(kind: str, rng: np.random.Generator, cfg: EnvConfig,
              rotation: float | None = None,
              center: tuple[float, float] | None = None) -> np.ndarray:
    """Scripted goal shape resampled to geom_count points at exact rest-length
    spacing, randomly rotated and translated in-bounds.  `rotation`/`center`
    override the random placement (used by tests and the straightening task)."""
    kind = kind.lower()
    if kind not in GOAL_KINDS:
        raise ValueError(f"unsupported goal kind {kind!r} (supported: {GOAL_KINDS})")
    n = cfg.geom_count
    l0 = cfg.rest_length
    # chord marching consumes more arc than chord on curved templates; pad 15%
    total = (n - 1) * l0 * 1.15
    poly = _dense_polyline(kind, total)
    pts = _chord_resample(poly, n, l0)
    pts = pts - pts.mean(axis=0)

    theta = rng.uniform(0.0, 2.0 * math.pi) if rotation is None else float(rotation)
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    pts = pts @ rot.T

    margin = 2.0
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if center is None:
        sx = rng.uniform(margin - lo[0], cfg.image_size - margin - hi[0])
        sy = rng.uniform(margin - lo[1], cfg.image_size - margin - hi[1])
        shift = np.array([sx, sy])
    else:
        shift = np.asarray(center, dtype=np.float64) - pts.mean(axis=0)
        # keep the requested placement but never leave the image
        shift = np.minimum(np.maximum(shift, margin - lo), cfg.image_size - margin - hi)
    return pts + shift


def check_state(state: np.ndarray, cfg: EnvConfig, tol: float = 1e-6) -> None:
    """Raise if a state violates the chain invariants."""
    if state.shape != (cfg.geom_count, 2):
        raise ValueError(f"bad state shape {state.shape}")
    if np.any(state < 0.0) or np.any(state >= cfg.image_size):
        raise ValueError("state out of bounds")
    seg = np.linalg.norm(np.diff(state, axis=0), axis=1)
    if np.any(seg > cfg.rest_length + tol):
        raise ValueError(f"segment length {seg.max():.9f} exceeds rest length")
