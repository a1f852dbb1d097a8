"""Episode collection for the hierarchical learner.

One seat is controlled by the skill-conditioned policy: a skill is drawn at
the first state, a termination coin is flipped at every later state (against
the active skill), and a fresh skill is drawn whenever the coin says stop.
The other seat is a partner: any object with ``act(layout, state, seat, rng)``.
Rollouts store everything PPO needs (log-probabilities at sampling time,
decision points, termination samples) plus the joint action stream, which
replays episodes bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kitchen as K
from .policy import HierarchicalPolicy


@dataclass(frozen=True)
class Decision:
    """Skill draw at step t (entering state s_t)."""

    t: int
    skill: int
    logp: float


@dataclass(frozen=True)
class TermSample:
    """Termination coin for ``prev_skill`` flipped at state s_t (t >= 1)."""

    t: int
    prev_skill: int
    outcome: int
    logp: float


@dataclass
class Rollout:
    layout_name: str
    seat: int
    partner_name: str
    obs: np.ndarray                 # (T+1, obs_dim), includes the final state
    skills: np.ndarray              # (T,) active skill at each step
    actions: np.ndarray             # (T,) learner actions
    logp_actions: np.ndarray        # (T,)
    rewards: np.ndarray             # (T,) team + learner's shaped stream
    team_rewards: np.ndarray        # (T,)
    joint_actions: np.ndarray       # (T, 2) both seats, for replay
    decisions: list[Decision] = field(default_factory=list)
    terminations: list[TermSample] = field(default_factory=list)
    event_counts: dict[str, int] = field(default_factory=dict)

    @property
    def length(self) -> int:
        return int(self.skills.shape[0])

    @property
    def team_return(self) -> float:
        return float(self.team_rewards.sum())

    def segments(self) -> list[tuple[int, int, int]]:
        """Decision-to-decision spans as (start, end, skill)."""
        spans = []
        for i, d in enumerate(self.decisions):
            end = (
                self.decisions[i + 1].t if i + 1 < len(self.decisions) else self.length
            )
            spans.append((d.t, end, d.skill))
        return spans

    def segment_of_step(self) -> np.ndarray:
        """Index of the decision segment each step belongs to."""
        out = np.zeros(self.length, dtype=int)
        for k, (start, end, _) in enumerate(self.segments()):
            out[start:end] = k
        return out


def collect_rollout(
    layout: K.Layout,
    policy: HierarchicalPolicy,
    partner,
    seat: int,
    policy_rng: np.random.Generator,
    partner_rng: np.random.Generator,
    reward_cfg: K.RewardConfig = K.RewardConfig(),
    horizon: int | None = None,
) -> Rollout:
    T = layout.horizon if horizon is None else min(horizon, layout.horizon)
    state = K.reset(layout)
    obs = np.empty((T + 1, K.obs_dim(layout)))
    skills = np.empty(T, dtype=int)
    actions = np.empty(T, dtype=int)
    logp_actions = np.empty(T)
    rewards = np.empty(T)
    team_rewards = np.empty(T)
    joint_actions = np.empty((T, 2), dtype=int)
    decisions: list[Decision] = []
    terminations: list[TermSample] = []
    event_counts: dict[str, int] = {}

    skill = -1
    for t in range(T):
        obs_t = K.observe(layout, state, seat)
        obs[t] = obs_t
        if t == 0:
            skill, logp_z, _ = policy.select_skill(obs_t, policy_rng)
            decisions.append(Decision(t=0, skill=skill, logp=logp_z))
        else:
            b, p_term = policy.sample_termination(obs_t, skill, policy_rng)
            logp_b = float(np.log(p_term if b else 1.0 - p_term))
            terminations.append(
                TermSample(t=t, prev_skill=skill, outcome=b, logp=logp_b)
            )
            if b:
                skill, logp_z, _ = policy.select_skill(obs_t, policy_rng)
                decisions.append(Decision(t=t, skill=skill, logp=logp_z))
        a, logp_a, _ = policy.act(obs_t, skill, policy_rng)
        pa = int(partner.act(layout, state, 1 - seat, partner_rng))
        joint = (a, pa) if seat == 0 else (pa, a)
        state, team, shaped, events = K.step(layout, state, joint, reward_cfg)

        skills[t] = skill
        actions[t] = a
        logp_actions[t] = logp_a
        team_rewards[t] = team
        rewards[t] = team + shaped[seat]
        joint_actions[t] = joint
        for ev in events:
            event_counts[ev.kind] = event_counts.get(ev.kind, 0) + 1

    obs[T] = K.observe(layout, state, seat)
    return Rollout(
        layout_name=layout.name,
        seat=seat,
        partner_name=getattr(partner, "name", type(partner).__name__),
        obs=obs,
        skills=skills,
        actions=actions,
        logp_actions=logp_actions,
        rewards=rewards,
        team_rewards=team_rewards,
        joint_actions=joint_actions,
        decisions=decisions,
        terminations=terminations,
        event_counts=event_counts,
    )


def collect_batch(
    layout: K.Layout,
    policy: HierarchicalPolicy,
    partners: list,
    n_rollouts: int,
    seed_path: tuple[int, ...],
    reward_cfg: K.RewardConfig = K.RewardConfig(),
    horizon: int | None = None,
) -> list[Rollout]:
    """Collect ``n_rollouts`` episodes, cycling partners round-robin and
    alternating the learner's seat. Each rollout draws its policy and partner
    randomness from ``default_rng([*seed_path, rollout_index, stream])``."""
    if not partners:
        raise ValueError("at least one partner required")
    rollouts = []
    for i in range(n_rollouts):
        rollouts.append(
            collect_rollout(
                layout,
                policy,
                partners[i % len(partners)],
                seat=i % 2,
                policy_rng=np.random.default_rng([*seed_path, i, 0]),
                partner_rng=np.random.default_rng([*seed_path, i, 1]),
                reward_cfg=reward_cfg,
                horizon=horizon,
            )
        )
    return rollouts


def replay_joint_actions(
    layout: K.Layout,
    joint_actions: np.ndarray,
    reward_cfg: K.RewardConfig = K.RewardConfig(),
):
    """Re-simulate a logged action stream. Returns (final_state, team_rewards,
    shaped_rewards) for bit-exact trajectory verification."""
    state = K.reset(layout)
    T = len(joint_actions)
    team = np.empty(T)
    shaped = np.empty((T, 2))
    for t, joint in enumerate(joint_actions):
        state, r, sh, _ = K.step(layout, state, (int(joint[0]), int(joint[1])), reward_cfg)
        team[t] = r
        shaped[t] = sh
    return state, team, shaped


def record_to_rollout(
    record: dict,
    reward_cfg: K.RewardConfig = K.RewardConfig(),
    require_skills: bool = True,
) -> Rollout:
    """Re-simulate a trajectory record into a full Rollout: observations,
    reward streams (decomposed under *reward_cfg*), and event counts.
    Log-probabilities cannot be recovered from the log and are zero-filled.
    Raises when the record carries no skill labels, unless the caller only
    needs the reward streams (``require_skills=False``), in which case a
    single all-zero skill segment stands in."""
    if not record.get("skills") and require_skills:
        raise ValueError("trajectory record carries no skill labels")
    layout = K.load_layout(record["layout"])
    seat = int(record["seat"])
    joint = np.asarray(record["joint_actions"], dtype=int)
    T = len(joint)
    obs = np.empty((T + 1, K.obs_dim(layout)))
    team = np.empty(T)
    shaped = np.empty((T, 2))
    event_counts: dict[str, int] = {}
    state = K.reset(layout)
    for t in range(T):
        obs[t] = K.observe(layout, state, seat)
        state, r, sh, events = K.step(
            layout, state, (int(joint[t, 0]), int(joint[t, 1])), reward_cfg
        )
        team[t] = r
        shaped[t] = sh
        for e in events:
            event_counts[e.kind] = event_counts.get(e.kind, 0) + 1
    obs[T] = K.observe(layout, state, seat)
    if record.get("skills"):
        skills = np.asarray(record["skills"], dtype=int)
        decisions = [
            Decision(t=int(t), skill=int(z), logp=0.0)
            for t, z in record.get("decisions", [])
        ]
    else:
        skills = np.zeros(T, dtype=int)
        decisions = [Decision(t=0, skill=0, logp=0.0)]
    return Rollout(
        layout_name=record["layout"],
        seat=seat,
        partner_name=record.get("partner", ""),
        obs=obs,
        skills=skills,
        actions=joint[:, seat].copy(),
        logp_actions=np.zeros(T),
        rewards=team + shaped[:, seat],
        team_rewards=team,
        joint_actions=joint,
        decisions=decisions,
        terminations=[],
        event_counts=dict(sorted(event_counts.items())),
    )


def rollout_record(rollout: Rollout, seed_path: tuple[int, ...] = ()) -> dict:
    """JSON-serializable trajectory record (sufficient for replay)."""
    return {
        "layout": rollout.layout_name,
        "seat": rollout.seat,
        "partner": rollout.partner_name,
        "seed_path": list(seed_path),
        "joint_actions": rollout.joint_actions.tolist(),
        "skills": rollout.skills.tolist(),
        "decisions": [[d.t, d.skill] for d in rollout.decisions],
        "team_return": rollout.team_return,
        "event_counts": dict(sorted(rollout.event_counts.items())),
    }
