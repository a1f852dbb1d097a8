"""Evaluation: pair an actor with each partner and score team reward only.

Shaped rewards are a training aid; evaluation counts deliveries. Each
(partner, seat, episode) triple gets its own seeded generator so runs are
reproducible and individually replayable. Results group by partner name
with mean and standard deviation per group; the headline number is the
mean over group means, so no partner dominates by count.

Also home to the skill-separation probe: embed representative frames of
constant-skill windows and compare cosine similarity within a skill
against across skills.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kitchen as K
from .contrast import ContrastConfig, segment_skills
from .nets import forward
from .policy import HierarchicalPolicy
from .rollout import Rollout, collect_rollout


class HierActor:
    """Plays a skill hierarchy: keeps the active skill across ticks,
    redrawing when the termination head fires."""

    name = "hierarchy"

    def __init__(self, policy: HierarchicalPolicy):
        self.policy = policy
        self.skill: int | None = None
        self.decided = False

    def reset(self):
        self.skill = None
        self.decided = False

    def act(self, layout, state, seat, rng) -> int:
        obs = K.observe(layout, state, seat)
        self.decided = self.skill is None
        if self.skill is None:
            self.skill, _, _ = self.policy.select_skill(obs, rng)
        else:
            fired, _ = self.policy.sample_termination(obs, self.skill, rng)
            if fired:
                self.decided = True
                self.skill, _, _ = self.policy.select_skill(obs, rng)
        return self.policy.act(obs, self.skill, rng)[0]


class RandomActor:
    """Uniform-random baseline."""

    name = "random"

    def reset(self):
        pass

    def act(self, layout, state, seat, rng) -> int:
        return int(rng.integers(K.N_ACTIONS))


def run_episode(layout, actor, partner, seat, actor_rng, partner_rng,
                horizon=None) -> dict:
    """One episode; returns the score plus a replayable trajectory
    (joint actions, and skill labels when the actor exposes them)."""
    T = layout.horizon if horizon is None else min(horizon, layout.horizon)
    actor.reset()
    state = K.reset(layout)
    team = 0.0
    joint_actions: list[list[int]] = []
    skills: list[int] = []
    decisions: list[list[int]] = []
    event_counts: dict[str, int] = {}
    for t in range(T):
        a = actor.act(layout, state, seat, actor_rng)
        skill = getattr(actor, "skill", None)
        if skill is not None:
            if getattr(actor, "decided", not skills):
                decisions.append([t, int(skill)])
            skills.append(int(skill))
        p = int(partner.act(layout, state, 1 - seat, partner_rng))
        joint = (a, p) if seat == 0 else (p, a)
        state, tr, _, events = K.step(layout, state, joint)
        team += tr
        joint_actions.append(list(joint))
        for e in events:
            event_counts[e.kind] = event_counts.get(e.kind, 0) + 1
    return {
        "team_return": team,
        "deliveries": event_counts.get("delivery", 0),
        "length": T,
        "joint_actions": joint_actions,
        "skills": skills,
        "decisions": decisions,
        "event_counts": dict(sorted(event_counts.items())),
    }


def evaluate(layout, actor, partners, episodes_per_pair: int = 5, seed: int = 0,
             horizon=None, log_path: str | Path | None = None) -> dict:
    """Score ``actor`` with every partner on both seats.

    Returns per-partner mean/std over 2 x episodes_per_pair episodes and
    the mean of those means as ``overall_mean``.
    """
    log_file = Path(log_path).open("w") if log_path is not None else None
    per_partner: dict[str, dict] = {}
    try:
        for p_idx, partner in enumerate(partners):
            name = getattr(partner, "name", type(partner).__name__)
            returns = []
            seat_returns: dict[int, list[float]] = {0: [], 1: []}
            for seat in (0, 1):
                for ep in range(episodes_per_pair):
                    result = run_episode(
                        layout, actor, partner, seat,
                        actor_rng=np.random.default_rng([seed, p_idx, seat, ep, 0]),
                        partner_rng=np.random.default_rng([seed, p_idx, seat, ep, 1]),
                        horizon=horizon,
                    )
                    returns.append(result["team_return"])
                    seat_returns[seat].append(result["team_return"])
                    if log_file is not None:
                        log_file.write(json.dumps({
                            "layout": layout.name,
                            "actor": actor.name,
                            "partner": name,
                            "seat": seat,
                            "episode": ep,
                            "seed_path": [seed, p_idx, seat, ep],
                            **result,
                        }, sort_keys=True) + "\n")
            arr = np.array(returns)
            entry = {
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "episodes": len(returns),
                "seat_means": [float(np.mean(seat_returns[s])) for s in (0, 1)],
            }
            stage = getattr(partner, "stage", "")
            if stage:
                entry["stage"] = stage
            per_partner[name] = entry
    finally:
        if log_file is not None:
            log_file.close()

    by_stage: dict[str, list[float]] = {}
    for entry in per_partner.values():
        if "stage" in entry:
            by_stage.setdefault(entry["stage"], []).append(entry["mean"])
    # headline spread: across stage-set means when partners carry training
    # stages, otherwise across per-partner means
    set_means = (
        [float(np.mean(v)) for _, v in sorted(by_stage.items())]
        if by_stage
        else [e["mean"] for e in per_partner.values()]
    )
    summary = {
        "layout": layout.name,
        "actor": actor.name,
        "episodes_per_pair": episodes_per_pair,
        "per_partner": per_partner,
        "overall_mean": float(np.mean([e["mean"] for e in per_partner.values()])),
        "overall_std": float(np.std(set_means)),
    }
    if by_stage:
        summary["by_stage"] = {
            stage: float(np.mean(v)) for stage, v in sorted(by_stage.items())
        }
    return summary


# ------------------------------------------------------- skill separation


def skill_window_embeddings(policy: HierarchicalPolicy, layout, partners,
                            n_rollouts: int = 10, seed: int = 0,
                            horizon=None, window: int = 10, min_window: int = 5,
                            mode: str = "pooled"):
    """Collect fresh rollouts, cut constant-skill windows, and embed them.

    ``mode="representative"`` embeds one sampled frame per window;
    ``mode="pooled"`` averages the embeddings of every frame in the window
    and renormalizes, a steadier sequence-level summary. Returns
    (embeddings, skill_ids)."""
    if mode not in ("representative", "pooled"):
        raise ValueError(f"unknown embedding mode {mode!r}")
    cfg = ContrastConfig(window=window, min_window=min_window)
    wrng = np.random.default_rng([seed, 7])
    embeddings, ids = [], []
    for i in range(n_rollouts):
        partner = partners[i % len(partners)]
        r = collect_rollout(
            layout, policy, partner, seat=i % 2,
            policy_rng=np.random.default_rng([seed, i, 0]),
            partner_rng=np.random.default_rng([seed, i, 1]),
            horizon=horizon,
        )
        for w in segment_skills(r.skills, cfg, wrng):
            if mode == "representative":
                emb = forward(policy.heads["embed"], r.obs[w.rep])[0]
            else:
                frames = forward(policy.heads["embed"], r.obs[w.start:w.end])[0]
                mean = frames.mean(axis=0)
                emb = mean / max(np.linalg.norm(mean), 1e-12)
            embeddings.append(emb)
            ids.append(w.skill)
    if not embeddings:
        return np.zeros((0, policy.config.embed_dim)), np.zeros(0, dtype=int)
    return np.stack(embeddings), np.array(ids, dtype=int)


def _embed_frames(policy: HierarchicalPolicy, obs: np.ndarray) -> np.ndarray:
    out = forward(policy.heads["embed"], obs)[0]
    return out


def _pooled(frames: np.ndarray) -> np.ndarray:
    mean = frames.mean(axis=0)
    return mean / max(np.linalg.norm(mean), 1e-12)


def sequence_embeddings(policy: HierarchicalPolicy, rollout: Rollout,
                        rollout_index: int = 0,
                        rng: np.random.Generator | None = None) -> list[dict]:
    """One record per constant-skill span of a rollout, carrying both a
    representative-state embedding (uniformly sampled frame) and a
    mean-pooled embedding of every frame in the span.

    A one-step span has a single frame, so both variants coincide there.
    Raises on a trajectory that carries no skill labels."""
    if rollout.skills is None or len(rollout.skills) == 0:
        raise ValueError("trajectory carries no skill labels")
    if rng is None:
        rng = np.random.default_rng(0)
    records = []
    for j, (start, end, skill) in enumerate(rollout.segments()):
        frames = _embed_frames(policy, rollout.obs[start:end])
        rep_t = int(rng.integers(start, end))
        records.append({
            "rollout": rollout_index,
            "segment": j,
            "skill": int(skill),
            "partner": rollout.partner_name,
            "start": int(start),
            "end": int(end),
            "representative": frames[rep_t - start].tolist(),
            "pooled": _pooled(frames).tolist(),
        })
    return records


def window_embedding_table(policy: HierarchicalPolicy, layout, partners,
                           n_rollouts: int = 10, seed: int = 0, horizon=None,
                           window: int = 10, min_window: int = 5) -> list[dict]:
    """Constant-skill window views embedded with both variants, one record
    per window — the same segmentation the contrastive objective trains on,
    in an export-ready form."""
    cfg = ContrastConfig(window=window, min_window=min_window)
    wrng = np.random.default_rng([seed, 7])
    records = []
    for i in range(n_rollouts):
        partner = partners[i % len(partners)]
        r = collect_rollout(
            layout, policy, partner, seat=i % 2,
            policy_rng=np.random.default_rng([seed, i, 0]),
            partner_rng=np.random.default_rng([seed, i, 1]),
            horizon=horizon,
        )
        for j, w in enumerate(segment_skills(r.skills, cfg, wrng)):
            frames = _embed_frames(policy, r.obs[w.start:w.end])
            records.append({
                "rollout": i,
                "segment": j,
                "skill": int(w.skill),
                "partner": r.partner_name,
                "start": int(w.start),
                "end": int(w.end),
                "representative": frames[w.rep - w.start].tolist(),
                "pooled": _pooled(frames).tolist(),
            })
    return records


@dataclass
class SimilarityMatrix:
    """Pairwise cosine similarities over segment embeddings, rows ordered
    by (skill, arrival); symmetric with unit diagonal."""

    matrix: np.ndarray
    labels: list[tuple[int, int]]  # (skill id, segment index)

    def to_record(self) -> dict:
        return {
            "labels": [list(l) for l in self.labels],
            "matrix": self.matrix.tolist(),
        }


def similarity_matrix(embeddings: np.ndarray, skill_ids) -> SimilarityMatrix:
    """Cosine similarity of every segment pair, rows grouped by skill."""
    skill_ids = np.asarray(skill_ids, dtype=int)
    if len(skill_ids) == 0:
        raise ValueError("empty embedding table")
    order = np.argsort(skill_ids, kind="stable")
    emb = np.asarray(embeddings, dtype=float)[order]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.maximum(norms, 1e-12)
    sims = np.clip(emb @ emb.T, -1.0, 1.0)
    np.fill_diagonal(sims, 1.0)
    labels = [(int(skill_ids[i]), int(i)) for i in order]
    return SimilarityMatrix(matrix=sims, labels=labels)


def intra_inter_stats(matrix: np.ndarray | SimilarityMatrix,
                      labels=None) -> tuple[float, float, float]:
    """(mean same-skill off-diagonal similarity, mean cross-skill
    similarity, their difference). Raises when no skill has two segments
    or when every segment shares one skill (either mean undefined)."""
    if isinstance(matrix, SimilarityMatrix):
        if labels is None:
            labels = [skill for skill, _ in matrix.labels]
        matrix = matrix.matrix
    skills = np.asarray(labels, dtype=int)
    n = len(skills)
    same = np.equal.outer(skills, skills)
    off = ~np.eye(n, dtype=bool)
    intra_mask = same & off
    inter_mask = ~same
    if not intra_mask.any():
        raise ValueError("no skill has two segments; intra mean undefined")
    if not inter_mask.any():
        raise ValueError("all segments share one skill; inter mean undefined")
    intra = float(np.asarray(matrix)[intra_mask].mean())
    inter = float(np.asarray(matrix)[inter_mask].mean())
    return intra, inter, intra - inter


def skill_cosine_gap(embeddings: np.ndarray, skill_ids: np.ndarray) -> float:
    """Mean cosine similarity of same-skill pairs minus different-skill
    pairs. Positive means the embedding space separates skills. NaN when
    either pair set is empty."""
    if len(skill_ids) < 2:
        return float("nan")
    try:
        sm = similarity_matrix(embeddings, skill_ids)
        _, _, gap = intra_inter_stats(sm)
    except ValueError:
        return float("nan")
    return gap
