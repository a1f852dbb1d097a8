"""Static images from training metrics and embedding similarity tables.

Rendering is deterministic: fixed figure geometry, no timestamps, and the
writer's software tag suppressed, so identical inputs produce identical
image bytes (reruns stay verifiable by hash).
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_SAVE_KWARGS = {"dpi": 110, "metadata": {"Software": None}}


def training_curves(metrics_path: str | Path, out_path: str | Path) -> Path:
    """Render per-iteration training metrics to a four-panel image:
    team return, reward-mixing weight, contrastive loss with its mutual-
    information bound, and both policy entropies."""
    rows = [
        json.loads(line)
        for line in Path(metrics_path).read_text().splitlines()
        if line.strip()
    ]
    if not rows:
        raise ValueError(f"{metrics_path}: no metric records")
    steps = [r["env_steps"] for r in rows]

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0][0]
    ax.plot(steps, [r["team_return_mean"] for r in rows], color="tab:blue")
    ax.set_title("mean team return per rollout")
    ax = axes[0][1]
    ax.plot(steps, [r["mixing_lambda"] for r in rows], color="tab:orange")
    ax.set_title("intrinsic mixing weight")
    ax.set_ylim(-0.05, 1.05)
    ax = axes[1][0]
    ax.plot(steps, [r["infonce_loss"] for r in rows], label="contrastive loss")
    ax.plot(steps, [r["mi_lower_bound"] for r in rows], label="MI lower bound")
    ax.legend()
    ax.set_title("skill discriminability")
    ax = axes[1][1]
    ax.plot(steps, [r["entropy_lo"] for r in rows], label="controller")
    ax.plot(steps, [r["entropy_hi"] for r in rows], label="selector")
    ax.legend()
    ax.set_title("policy entropy")
    for row in axes:
        for a in row:
            a.set_xlabel("environment steps")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
    return out_path


def similarity_heatmap(matrix: np.ndarray, labels, out_path: str | Path) -> Path:
    """Render a skill-grouped cosine-similarity matrix with boundaries
    drawn between skill blocks."""
    matrix = np.asarray(matrix)
    skills = [int(s) for s, _ in labels]
    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="RdBu_r")
    fig.colorbar(im, ax=ax, label="cosine similarity")
    for i in range(1, len(skills)):
        if skills[i] != skills[i - 1]:
            ax.axhline(i - 0.5, color="black", linewidth=0.6)
            ax.axvline(i - 0.5, color="black", linewidth=0.6)
    ax.set_title("segment embedding similarity (rows grouped by skill)")
    ax.set_xlabel("segment")
    ax.set_ylabel("segment")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
    return out_path
