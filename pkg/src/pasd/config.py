"""Training/evaluation configuration with per-layout defaults.

Configs are plain dataclasses; JSON files (and CLI flags) override fields by
name. ``resolve()`` fills the layout-dependent defaults: learning rate and
its decay ratio, skill count, and whether shaped rewards are enabled.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

# (initial learning rate, decay ratio): the rate anneals linearly from the
# initial value to initial/ratio over the full run
LAYOUT_LEARNING_RATES: dict[str, tuple[float, float]] = {
    "cramped_room": (1e-3, 3.0),
    "asymmetric_advantages": (1e-3, 3.0),
    "coordination_ring": (6e-4, 1.5),
    "forced_coordination": (8e-4, 2.0),
    "counter_circuit": (8e-4, 3.0),
}
DEFAULT_LEARNING_RATE = (1e-3, 3.0)

# forced_coordination: the pot-side chef never touches an onion dispenser,
# so the dispenser/pot shaping stream is disabled and one skill is dropped
LAYOUT_N_SKILLS: dict[str, int] = {"forced_coordination": 5}
DEFAULT_N_SKILLS = 6
UNSHAPED_LAYOUTS = frozenset({"forced_coordination"})


@dataclass
class TrainConfig:
    layout: str = "cramped_room"
    seed: int = 0
    total_steps: int = 10_000_000
    n_envs: int = 30
    horizon: int | None = None          # None: the layout's own horizon
    n_skills: int | None = None         # None: per-layout default
    partners: tuple[str, ...] = ()      # scripted names and/or checkpoint paths

    gamma: float = 0.99
    gae_lambda: float = 0.98
    clip_eps: float = 0.05
    value_coef: float = 0.5
    entropy_coef_start: float = 0.01
    entropy_coef_end: float = 0.0
    mixing_start: float = 1.0
    mixing_end: float = 0.05
    learning_rate: float | None = None  # None: per-layout default
    lr_decay_ratio: float | None = None
    batch_size: int = 64
    n_epochs: int = 4
    max_grad_norm: float = 0.5

    temperature: float = 0.1
    window: int = 10
    min_window: int = 5
    embed_dim: int = 16
    embed_epochs: int = 1               # embedding-head updates per iteration
    embed_learning_rate: float | None = None  # None: follow the policy schedule
    hidden: tuple[int, ...] = (64, 64)

    # Termination-head entropy bonus, annealed linearly to zero over training
    # (None: follow the policy entropy schedule).  A nonzero start keeps early
    # segments short enough for the selector to get decision data; annealing
    # to zero lets late training commit to long single-skill segments.
    term_entropy_coef: float | None = None

    symmetric_mixing: bool = False
    termination_advantage_mode: str = "segment_gae"  # or "option_critic"
    shaping: bool | None = None         # None: per-layout default
    checkpoint_every: int = 0           # iterations; 0 = only final

    def resolve(self) -> "TrainConfig":
        """Fill layout-dependent None fields with their defaults."""
        lr, ratio = LAYOUT_LEARNING_RATES.get(self.layout, DEFAULT_LEARNING_RATE)
        return dataclasses.replace(
            self,
            n_skills=self.n_skills
            if self.n_skills is not None
            else LAYOUT_N_SKILLS.get(self.layout, DEFAULT_N_SKILLS),
            learning_rate=self.learning_rate if self.learning_rate is not None else lr,
            lr_decay_ratio=self.lr_decay_ratio
            if self.lr_decay_ratio is not None
            else ratio,
            shaping=self.shaping
            if self.shaping is not None
            else self.layout not in UNSHAPED_LAYOUTS,
        )

    def __post_init__(self):
        if self.termination_advantage_mode not in ("segment_gae", "option_critic"):
            raise ValueError(
                f"unknown termination_advantage_mode {self.termination_advantage_mode!r}"
            )
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must be in (0, 1)")
        if self.n_envs <= 0 or self.total_steps <= 0:
            raise ValueError("n_envs and total_steps must be positive")
        if self.embed_epochs < 0:
            raise ValueError("embed_epochs must be non-negative")


@dataclass
class PopulationConfig:
    layout: str = "cramped_room"
    seed: int = 0
    pop_size: int = 16
    steps_per_agent: int = 500_000
    n_envs: int = 30
    horizon: int | None = None
    jsd_weight: float = 0.1
    checkpoint_fractions: tuple[float, ...] = (0.1, 0.5, 1.0)
    stage_names: tuple[str, ...] = ("early", "mid", "final")

    gamma: float = 0.99
    gae_lambda: float = 0.98
    clip_eps: float = 0.05
    value_coef: float = 0.5
    entropy_coef_start: float = 0.01
    entropy_coef_end: float = 0.0
    learning_rate: float | None = None
    lr_decay_ratio: float | None = None
    batch_size: int = 64
    n_epochs: int = 4
    max_grad_norm: float = 0.5
    hidden: tuple[int, ...] = (64, 64)
    shaping: bool | None = None

    def resolve(self) -> "PopulationConfig":
        lr, ratio = LAYOUT_LEARNING_RATES.get(self.layout, DEFAULT_LEARNING_RATE)
        return dataclasses.replace(
            self,
            learning_rate=self.learning_rate if self.learning_rate is not None else lr,
            lr_decay_ratio=self.lr_decay_ratio
            if self.lr_decay_ratio is not None
            else ratio,
            shaping=self.shaping
            if self.shaping is not None
            else self.layout not in UNSHAPED_LAYOUTS,
        )

    def __post_init__(self):
        if len(self.checkpoint_fractions) != len(self.stage_names):
            raise ValueError("one stage name per checkpoint fraction")
        if self.pop_size <= 0:
            raise ValueError("pop_size must be positive")


@dataclass
class EvalConfig:
    layout: str = "cramped_room"
    seed: int = 0
    episodes_per_pair: int = 5
    partners: tuple[str, ...] = ()
    horizon: int | None = None


def _coerce(value, annotation: str):
    if value is None:
        return None
    if "tuple" in annotation:
        return tuple(value)
    return value


def apply_overrides(cfg, overrides: dict):
    """Return a copy of a config dataclass with named fields replaced."""
    names = {f.name: f for f in dataclasses.fields(cfg)}
    unknown = set(overrides) - set(names)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cleaned = {
        k: _coerce(v, str(names[k].type)) for k, v in overrides.items()
    }
    return dataclasses.replace(cfg, **cleaned)


def load_config(path: str | Path, cls):
    """Build a config of type ``cls`` from a JSON object file."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return apply_overrides(cls(), data)


def config_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg) -> str:
    blob = json.dumps(config_dict(cfg), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dump_config(cfg) -> str:
    return json.dumps(config_dict(cfg), sort_keys=True, indent=2, default=list)
