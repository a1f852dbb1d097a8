"""Skill-conditioned hierarchical policy.

Six independent dense networks over the same observation: a skill selector
(softmax over K skills), a low-level action policy and termination head
(both conditioned on the active skill via one-hot concatenation), one value
head per level, and a unit-norm state embedding used for the contrastive
intrinsic signal. Selector and termination heads start with a zeroed last
layer (uniform skill choice, termination probability exactly 0.5); the
controller keeps its random last layer so the K skills are behaviorally
distinct from the first rollout, giving the contrastive head something to
separate before any training.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import checkpoint
from .nets import NetworkSpec, ParamSet, forward, init_params, zero_last_layer

HEAD_NAMES = ("hi", "lo", "term", "v_hi", "v_lo", "embed")


@dataclass(frozen=True)
class PolicyConfig:
    obs_dim: int
    n_skills: int = 6
    n_actions: int = 6
    hidden: tuple[int, int] = (64, 64)
    embed_dim: int = 16

    def __post_init__(self):
        if self.obs_dim <= 0:
            raise ValueError("obs_dim must be positive")
        if self.n_skills < 2:
            raise ValueError("need at least 2 skills")
        if self.n_actions < 2:
            raise ValueError("need at least 2 actions")
        if self.embed_dim < 2:
            raise ValueError("embed_dim must be at least 2")


def head_specs(cfg: PolicyConfig) -> dict[str, NetworkSpec]:
    obs, h = cfg.obs_dim, tuple(cfg.hidden)
    cond = obs + cfg.n_skills
    return {
        "hi": NetworkSpec(sizes=(obs, *h, cfg.n_skills), output="softmax"),
        "lo": NetworkSpec(sizes=(cond, *h, cfg.n_actions), output="softmax"),
        "term": NetworkSpec(sizes=(cond, *h, 1), output="sigmoid"),
        "v_hi": NetworkSpec(sizes=(obs, *h, 1)),
        "v_lo": NetworkSpec(sizes=(cond, *h, 1)),
        "embed": NetworkSpec(sizes=(obs, *h, cfg.embed_dim), output="l2_normalize"),
    }


class HierarchicalPolicy:
    def __init__(self, config: PolicyConfig, seed: int = 0):
        self.config = config
        self.heads: dict[str, ParamSet] = {}
        for i, (name, spec) in enumerate(head_specs(config).items()):
            head_seed = np.random.default_rng([seed, i]).integers(2**31)
            self.heads[name] = init_params(spec, seed=int(head_seed))
        for name in ("hi", "term"):
            zero_last_layer(self.heads[name])

    # ----------------------------------------------------------- inputs

    def skill_onehot(self, skills) -> np.ndarray:
        return np.eye(self.config.n_skills)[np.asarray(skills)]

    def conditioned(self, obs: np.ndarray, skills) -> np.ndarray:
        """Concatenate observations with one-hot skills (handles 1-D/2-D)."""
        obs = np.asarray(obs, dtype=float)
        onehot = self.skill_onehot(skills)
        if obs.ndim == 1:
            return np.concatenate([obs, onehot])
        return np.concatenate([obs, onehot], axis=1)

    # ---------------------------------------------------------- acting

    def skill_probs(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.heads["hi"], obs)[0]

    def select_skill(self, obs: np.ndarray, rng: np.random.Generator):
        probs = self.skill_probs(obs)
        z = int(rng.choice(self.config.n_skills, p=probs))
        return z, float(np.log(probs[z])), probs

    def action_probs(self, obs: np.ndarray, skill) -> np.ndarray:
        return forward(self.heads["lo"], self.conditioned(obs, skill))[0]

    def act(self, obs: np.ndarray, skill: int, rng: np.random.Generator):
        probs = self.action_probs(obs, skill)
        a = int(rng.choice(self.config.n_actions, p=probs))
        return a, float(np.log(probs[a])), probs

    def termination_prob(self, obs: np.ndarray, skill: int) -> float:
        return float(forward(self.heads["term"], self.conditioned(obs, skill))[0][0])

    def sample_termination(self, obs: np.ndarray, skill: int, rng: np.random.Generator):
        p = self.termination_prob(obs, skill)
        b = int(rng.random() < p)
        return b, p

    def value_hi(self, obs: np.ndarray) -> float:
        return float(forward(self.heads["v_hi"], obs)[0][0])

    def value_lo(self, obs: np.ndarray, skill: int) -> float:
        return float(forward(self.heads["v_lo"], self.conditioned(obs, skill))[0][0])

    def embed(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.heads["embed"], obs)[0]

    # ---------------------------------------------------- batched views

    def values_hi(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.heads["v_hi"], obs)[0][:, 0]

    def values_lo(self, obs: np.ndarray, skills) -> np.ndarray:
        return forward(self.heads["v_lo"], self.conditioned(obs, skills))[0][:, 0]

    def embed_batch(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.heads["embed"], obs)[0]

    # ------------------------------------------------------ persistence

    def save(self, path, step: int = 0, config_hash: str = "", extra: dict | None = None):
        extra = dict(extra or {})
        extra["policy_config"] = asdict(self.config)
        extra["kind"] = "hierarchical"
        checkpoint.save_checkpoint(path, self.heads, step=step, config_hash=config_hash, extra=extra)

    @classmethod
    def load(cls, path) -> tuple["HierarchicalPolicy", dict]:
        heads, manifest = checkpoint.load_checkpoint(path)
        raw = manifest["extra"]["policy_config"]
        config = PolicyConfig(
            obs_dim=raw["obs_dim"],
            n_skills=raw["n_skills"],
            n_actions=raw["n_actions"],
            hidden=tuple(raw["hidden"]),
            embed_dim=raw["embed_dim"],
        )
        policy = cls.__new__(cls)
        policy.config = config
        policy.heads = heads
        missing = set(HEAD_NAMES) - set(heads)
        if missing:
            raise ValueError(f"checkpoint missing heads: {sorted(missing)}")
        return policy, manifest
