"""Geom-distance metric and success judgments."""

from __future__ import annotations

import numpy as np

SUCCESS_THRESHOLD_PX = 4.0


def geom_error(achieved: np.ndarray, target: np.ndarray) -> float:
    """Mean Euclidean distance over index-aligned geom pairs, taking the
    better of the two chain orientations (a rope has no canonical head)."""
    achieved = np.asarray(achieved, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if achieved.shape != target.shape:
        raise ValueError(f"geom count mismatch: {achieved.shape} vs {target.shape}")
    fwd = float(np.mean(np.linalg.norm(achieved - target, axis=1)))
    rev = float(np.mean(np.linalg.norm(achieved - target[::-1], axis=1)))
    return min(fwd, rev)


def success(record, task: str, threshold: float = SUCCESS_THRESHOLD_PX) -> bool:
    """goal: final-state error below threshold (strict); imitation: mean
    per-step error below threshold (strict)."""
    if task == "goal":
        return record.final_error < threshold
    if task == "imitation":
        return record.traj_avg_error < threshold
    raise ValueError(f"unknown task {task!r}")
