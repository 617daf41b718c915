"""Delimited outputs and the figures rendered next to them.

Every report path writes machine-readable CSV/JSON first, then a matplotlib
figure alongside it (same stem, .png).
"""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import MetricRow

METRICS_COLUMNS = ["method", "env_mode", "goal_kind", "seed", "episodes",
                   "successes", "success_rate", "mean_geom_error"]


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_loss_csv(curve: list[dict], path) -> None:
    with open(path, "w") as f:
        f.write("epoch,forward,inverse,decoder,total\n")
        for row in curve:
            f.write(",".join(_fmt(row[k]) for k in ("epoch", "forward", "inverse", "decoder", "total")) + "\n")


def plot_loss_curve(curve: list[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [r["epoch"] for r in curve]
    for key in ("forward", "inverse", "decoder", "total"):
        vals = [r[key] for r in curve]
        if any(v != 0.0 for v in vals):
            ax.plot(epochs, vals, label=key)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean batch loss")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_metrics_csv(per_seed_rows: list[dict], path) -> None:
    with open(path, "w") as f:
        f.write(",".join(METRICS_COLUMNS) + "\n")
        for row in per_seed_rows:
            f.write(",".join(_fmt(row[c]) for c in METRICS_COLUMNS) + "\n")


def write_metrics_json(aggregates: list[MetricRow], path) -> None:
    payload = [{
        "method": r.method,
        "env_mode": r.env_mode,
        "goal_kind": r.goal_kind,
        "success_rate": r.success_rate,
        "success_std": r.success_std,
        "mean_geom_error": r.mean_geom_error,
        "episodes": r.episodes,
        "per_seed": r.per_seed,
    } for r in aggregates]
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def plot_metrics(aggregates: list[MetricRow], path) -> None:
    cells = sorted({(r.env_mode, r.goal_kind) for r in aggregates})
    methods = sorted({r.method for r in aggregates})
    by_key = {(r.method, r.env_mode, r.goal_kind): r for r in aggregates}
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * len(cells), 4))
    width = 0.8 / max(len(methods), 1)
    xs = np.arange(len(cells))
    for mi, method in enumerate(methods):
        vals = [by_key[(method, *cell)].success_rate if (method, *cell) in by_key else 0.0
                for cell in cells]
        errs = [by_key[(method, *cell)].success_std if (method, *cell) in by_key else 0.0
                for cell in cells]
        ax.bar(xs + mi * width, vals, width, yerr=errs, capsize=3, label=method)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels([f"{m[:5]}/{g}" for m, g in cells], rotation=20)
    ax.set_ylabel("success rate")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_episode(record, reference: np.ndarray | None, path) -> None:
    """Overview strip: rope at selected steps, reference shape overlaid."""
    states = record.states
    n = states.shape[0]
    picks = sorted(set([0, n // 4, n // 2, 3 * n // 4, n - 1]))
    fig, axes = plt.subplots(1, len(picks), figsize=(2.2 * len(picks), 2.6))
    for ax, t in zip(np.atleast_1d(axes), picks):
        if reference is not None:
            ax.plot(reference[:, 0], reference[:, 1], "-", color="tab:green", alpha=0.5, lw=2)
        ax.plot(states[t][:, 0], states[t][:, 1], "o-", color="tab:blue", ms=2, lw=1)
        ax.set_xlim(0, 64)
        ax.set_ylim(0, 64)
        ax.set_aspect("equal")
        ax.set_title(f"t={t}", fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle(f"{record.task}: final err {record.final_error:.2f} px", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_frames(record, reference: np.ndarray | None, out_dir) -> None:
    """One PNG per step."""
    os.makedirs(out_dir, exist_ok=True)
    for t, state in enumerate(record.states):
        fig, ax = plt.subplots(figsize=(3, 3))
        if reference is not None:
            ax.plot(reference[:, 0], reference[:, 1], "-", color="tab:green", alpha=0.5, lw=2)
        ax.plot(state[:, 0], state[:, 1], "o-", color="tab:blue", ms=3, lw=1.2)
        ax.set_xlim(0, 64)
        ax.set_ylim(0, 64)
        ax.set_aspect("equal")
        ax.set_title(f"step {t}", fontsize=9)
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, f"frame_{t:03d}.png"), dpi=100)
        plt.close(fig)
