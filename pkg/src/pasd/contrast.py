"""Contrastive skill discrimination.

Rollouts are cut into fixed-length windows of constant skill; one
representative state per window is embedded on the unit sphere. Windows of
the same skill attract, windows of different skills repel, via an InfoNCE
loss over cosine similarities. The per-window softmax probability mass that
lands on same-skill windows (averaged over them) is the intrinsic reward:
it lies in (0, 1] and -log of it is bounded above by the per-window loss,
so minimizing the loss raises the reward directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import ParamSet, adam_step, backward, forward


@dataclass(frozen=True)
class ContrastConfig:
    temperature: float = 0.1
    window: int = 10
    min_window: int = 5

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 1 <= self.min_window <= self.window:
            raise ValueError("need 1 <= min_window <= window")


@dataclass(frozen=True)
class SkillSegment:
    """A constant-skill window: steps [start, end) of one rollout, with a
    representative step index used for embedding."""

    rollout: int
    skill: int
    start: int
    end: int
    rep: int

    @property
    def length(self) -> int:
        return self.end - self.start


def segment_skills(
    skills, cfg: ContrastConfig, rng: np.random.Generator, rollout: int = 0
) -> list[SkillSegment]:
    """Cut one rollout's per-step skill sequence into windows.

    Maximal constant-skill runs are split into consecutive windows of
    ``cfg.window`` steps; a trailing remainder survives only if it has at
    least ``cfg.min_window`` steps. Representatives are drawn uniformly
    inside each window.
    """
    skills = list(skills)
    segments: list[SkillSegment] = []
    run_start = 0
    for i in range(1, len(skills) + 1):
        if i < len(skills) and skills[i] == skills[run_start]:
            continue
        pos = run_start
        while i - pos >= cfg.window:
            segments.append(_make_window(skills, pos, pos + cfg.window, rng, rollout))
            pos += cfg.window
        if i - pos >= cfg.min_window:
            segments.append(_make_window(skills, pos, i, rng, rollout))
        run_start = i
    return segments


def _make_window(skills, start, end, rng, rollout) -> SkillSegment:
    rep = int(rng.integers(start, end))
    return SkillSegment(rollout=rollout, skill=skills[start], start=start, end=end, rep=rep)


def contrastive_terms(embeddings: np.ndarray, skill_ids, temperature: float):
    """InfoNCE loss, per-window intrinsic rewards and the loss gradient.

    For window i the positives are the other windows with the same skill and
    the softmax denominator runs over every other window. Windows whose skill
    appears nowhere else contribute no loss and get reward 0.

    Returns (loss, rewards, grad_embeddings, diagnostics).
    """
    E = np.asarray(embeddings, dtype=float)
    ids = np.asarray(skill_ids)
    n = E.shape[0]
    if ids.shape[0] != n:
        raise ValueError("one skill id per embedding required")
    if n < 2:
        return 0.0, np.zeros(n), np.zeros_like(E), {"n_windows": n, "n_anchored": 0}

    sims = (E @ E.T) / temperature
    off_diag = ~np.eye(n, dtype=bool)
    logits = np.where(off_diag, sims, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    exp_shifted = np.exp(logits - row_max)
    denom = exp_shifted.sum(axis=1, keepdims=True)
    q = exp_shifted / denom  # softmax over j != i
    log_q = logits - (row_max + np.log(denom))

    positives = (ids[:, None] == ids[None, :]) & off_diag
    pos_counts = positives.sum(axis=1)
    anchored = pos_counts > 0

    # single division keeps the all-similarities-equal case exactly
    # 1/(n-1) regardless of how many positives there are
    rewards = np.zeros(n)
    pos_exp = np.where(positives, exp_shifted, 0.0).sum(axis=1)
    rewards[anchored] = pos_exp[anchored] / (
        denom[anchored, 0] * pos_counts[anchored]
    )
    per_anchor_loss = np.zeros(n)
    per_anchor_loss[anchored] = (
        -np.where(positives, log_q, 0.0).sum(axis=1)[anchored] / pos_counts[anchored]
    )
    m = int(anchored.sum())
    loss = float(per_anchor_loss[anchored].mean()) if m else 0.0

    # dL/dsims for anchored rows: softmax minus the positive indicator
    grad_sims = np.zeros((n, n))
    if m:
        indicator = np.where(
            positives[anchored], 1.0 / pos_counts[anchored][:, None], 0.0
        )
        grad_sims[anchored] = (q[anchored] - indicator) / m
    grad_embeddings = (grad_sims + grad_sims.T) @ E / temperature

    diagnostics = {
        "n_windows": n,
        "n_anchored": m,
        "mean_reward": float(rewards[anchored].mean()) if m else 0.0,
        "mi_lower_bound": mi_lower_bound(n, loss),
    }
    return loss, rewards, grad_embeddings, diagnostics


def mi_lower_bound(n_windows: int, loss: float) -> float:
    """log(number of windows) minus the loss: the discrimination bound that
    equals log N when the loss is zero."""
    return float(np.log(n_windows) - loss) if n_windows > 0 else 0.0


def embedding_loss_and_grads(
    embed_params: ParamSet, rep_obs: np.ndarray, skill_ids, temperature: float
):
    """Loss, rewards and parameter gradients of the embedding network."""
    embeddings, cache = forward(embed_params, rep_obs)
    loss, rewards, grad_emb, diagnostics = contrastive_terms(
        embeddings, skill_ids, temperature
    )
    grads, _ = backward(embed_params, cache, grad_emb)
    return loss, rewards, grads, diagnostics


def update_embedding(
    embed_params: ParamSet,
    rep_obs: np.ndarray,
    skill_ids,
    temperature: float,
    learning_rate: float,
    n_steps: int = 1,
):
    """Adam step(s) on the InfoNCE loss. The returned rewards come from the
    embeddings *before* any step, matching the collect-then-update ordering
    of the training loop. Returns (loss, rewards, diagnostics)."""
    loss, rewards, grads, diagnostics = embedding_loss_and_grads(
        embed_params, rep_obs, skill_ids, temperature
    )
    if diagnostics["n_anchored"] == 0:
        return loss, rewards, diagnostics
    adam_step(embed_params, grads, learning_rate)
    for _ in range(n_steps - 1):
        _, _, grads, diag = embedding_loss_and_grads(
            embed_params, rep_obs, skill_ids, temperature
        )
        if diag["n_anchored"] == 0:
            break
        adam_step(embed_params, grads, learning_rate)
    return loss, rewards, diagnostics
