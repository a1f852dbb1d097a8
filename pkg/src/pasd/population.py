"""Partner pool: scripted archetypes and a diversity-regularized self-play
population.

Scripted partners are deterministic finite-state machines over the world
state (BFS navigation with a fixed action-order tiebreak), so they replay
exactly. The learned population trains flat PPO agents in self-play one
after another; agents after the first receive a per-state Jensen-Shannon
divergence bonus against the mean action distribution of their predecessors,
pushing the pool apart. Each agent checkpoints at fixed training fractions,
giving early/mid/final partner stages.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import kitchen as K
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PopulationConfig, config_hash
from .nets import (
    NetworkSpec,
    adam_step,
    clip_by_global_norm,
    forward,
    init_params,
    zero_last_layer,
)
from .ppo import (
    categorical_policy_terms,
    entropy_schedule,
    gae,
    linear_schedule,
    minibatch_slices,
    normalize_advantages,
    value_terms,
)

MOVE_ORDER = (K.UP, K.DOWN, K.LEFT, K.RIGHT)


# --------------------------------------------------------------- pathing


def neighbors(layout: K.Layout, pos):
    """(action, cell) pairs for the four moves, in fixed order."""
    out = []
    for action in MOVE_ORDER:
        dr, dc = K.ORIENT_DELTA[K.ACTION_ORIENT[action]]
        out.append((action, (pos[0] + dr, pos[1] + dc)))
    return out


def bfs_first_step(layout: K.Layout, start, targets: set, blocked: set):
    """First move action along a shortest floor path from ``start`` to any
    cell in ``targets`` (ties broken by move order). None if unreachable or
    already there."""
    if start in targets:
        return None
    frontier = [start]
    first_action = {start: None}
    while frontier:
        nxt = []
        for pos in frontier:
            for action, cell in neighbors(layout, pos):
                if cell in first_action or cell in blocked:
                    continue
                if layout.cell(cell) != K.FLOOR:
                    continue
                first_action[cell] = first_action[pos] if first_action[pos] is not None else action
                if cell in targets:
                    return first_action[cell]
                nxt.append(cell)
        frontier = nxt
    return None


def approach_and_use(layout: K.Layout, state: K.WorldState, seat: int, goal_cells):
    """Move toward the nearest floor cell adjacent to a goal; once adjacent,
    face the goal (a blocked move only rotates) and interact."""
    goal_cells = list(goal_cells)
    if not goal_cells:
        return K.STAY
    me = state.positions[seat]
    other = state.positions[1 - seat]
    goal_set = set(goal_cells)
    for action, cell in neighbors(layout, me):
        if cell in goal_set:
            facing = K.ORIENT_DELTA[state.orientations[seat]]
            if (me[0] + facing[0], me[1] + facing[1]) in goal_set:
                return K.INTERACT
            return action  # rotate toward (or bump into) the goal
    adjacency = {
        cell
        for goal in goal_cells
        for _, cell in neighbors(layout, goal)
        if layout.cell(cell) == K.FLOOR
    }
    step = bfs_first_step(layout, me, adjacency, blocked={other})
    return K.STAY if step is None else step


# ----------------------------------------------------- scripted partners


class ScriptedPartner:
    name = "scripted"

    def act(self, layout, state, seat, rng) -> int:
        raise NotImplementedError


class Stationary(ScriptedPartner):
    name = "stationary"

    def act(self, layout, state, seat, rng) -> int:
        return K.STAY


class UniformRandom(ScriptedPartner):
    name = "uniform_random"

    def act(self, layout, state, seat, rng) -> int:
        return int(rng.integers(K.N_ACTIONS))


class OnionSpecialist(ScriptedPartner):
    """Ferries onions from a dispenser into any pot with room."""

    name = "onion_specialist"

    def act(self, layout, state, seat, rng) -> int:
        held = state.held[seat]
        if held == K.ONION:
            open_pots = [
                cell
                for cell, (count, _) in zip(layout.pot_cells, state.pots)
                if count < K.POT_CAPACITY
            ]
            if open_pots:
                return approach_and_use(layout, state, seat, open_pots)
            # every pot busy: wait parked by the dispenser
            return approach_and_use(layout, state, seat, layout.cells_of(K.ONION_SOURCE))
        if held == K.SOUP:
            return approach_and_use(layout, state, seat, layout.cells_of(K.SERVING))
        if held == K.NOTHING:
            return approach_and_use(layout, state, seat, layout.cells_of(K.ONION_SOURCE))
        return K.STAY


class DishSpecialist(ScriptedPartner):
    """Fetches a dish, collects finished soup, delivers it."""

    name = "dish_specialist"

    def act(self, layout, state, seat, rng) -> int:
        held = state.held[seat]
        if held == K.SOUP:
            return approach_and_use(layout, state, seat, layout.cells_of(K.SERVING))
        if held == K.DISH:
            ready = [
                cell
                for cell, (count, timer) in zip(layout.pot_cells, state.pots)
                if count == K.POT_CAPACITY and timer == 0
            ]
            if ready:
                return approach_and_use(layout, state, seat, ready)
            cooking = [
                cell
                for cell, (_, timer) in zip(layout.pot_cells, state.pots)
                if timer is not None and timer > 0
            ]
            if cooking:
                return approach_and_use(layout, state, seat, cooking)
            # nothing on the stove: park by the dish dispenser
            return approach_and_use(layout, state, seat, layout.cells_of(K.DISH_SOURCE))
        if held == K.NOTHING:
            return approach_and_use(layout, state, seat, layout.cells_of(K.DISH_SOURCE))
        # holding an onion: drop it in a pot if possible, else hold still
        open_pots = [
            cell
            for cell, (count, _) in zip(layout.pot_cells, state.pots)
            if count < K.POT_CAPACITY
        ]
        return approach_and_use(layout, state, seat, open_pots) if open_pots else K.STAY


def ring_cycle(layout: K.Layout) -> list[tuple[int, int]]:
    """Floor cells in clockwise order, for layouts whose floor is a single
    cycle (every floor cell has exactly two floor neighbors)."""
    floor = list(layout.floor_cells)
    floor_set = set(floor)
    adjacency = {}
    for cell in floor:
        adj = [c for _, c in neighbors(layout, cell) if c in floor_set]
        if len(adj) != 2:
            raise ValueError(
                f"layout {layout.name!r} floor is not a ring: {cell} has {len(adj)} neighbors"
            )
        adjacency[cell] = adj
    start = min(floor)  # topmost, then leftmost
    east = (start[0], start[1] + 1)
    second = east if east in adjacency[start] else adjacency[start][0]
    cycle = [start, second]
    while True:
        a, b = adjacency[cycle[-1]]
        nxt = a if a != cycle[-2] else b
        if nxt == start:
            break
        cycle.append(nxt)
    if len(cycle) != len(floor):
        raise ValueError(f"layout {layout.name!r} floor is not a single ring")
    return cycle


class RingWalker(ScriptedPartner):
    """Walks the floor ring in a fixed rotational direction."""

    name = "clockwise"
    reverse = False

    def act(self, layout, state, seat, rng) -> int:
        cycle = ring_cycle(layout)
        if self.reverse:
            cycle = cycle[::-1]
        me = state.positions[seat]
        if me not in cycle:
            return K.STAY
        target = cycle[(cycle.index(me) + 1) % len(cycle)]
        for action, cell in neighbors(layout, me):
            if cell == target:
                return action
        return K.STAY


class Clockwise(RingWalker):
    name = "clockwise"
    reverse = False


class Counterclockwise(RingWalker):
    name = "counterclockwise"
    reverse = True


SCRIPTED_PARTNERS = {
    "stationary": Stationary,
    "uniform_random": UniformRandom,
    "onion_specialist": OnionSpecialist,
    "dish_specialist": DishSpecialist,
    "clockwise": Clockwise,
    "counterclockwise": Counterclockwise,
}


def make_scripted(name: str) -> ScriptedPartner:
    if name not in SCRIPTED_PARTNERS:
        raise ValueError(
            f"unknown scripted partner {name!r} (have: {', '.join(sorted(SCRIPTED_PARTNERS))})"
        )
    return SCRIPTED_PARTNERS[name]()


# ------------------------------------------------------------ flat agent


class FlatPolicy:
    """Plain softmax policy + value baseline over raw observations."""

    def __init__(self, obs_dim: int, n_actions: int = K.N_ACTIONS,
                 hidden: tuple[int, ...] = (64, 64), seed: int = 0):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hidden = tuple(hidden)
        pi_seed = int(np.random.default_rng([seed, 0]).integers(2**31))
        v_seed = int(np.random.default_rng([seed, 1]).integers(2**31))
        self.policy = init_params(
            NetworkSpec(sizes=(obs_dim, *self.hidden, n_actions), output="softmax"),
            seed=pi_seed,
        )
        zero_last_layer(self.policy)
        self.value = init_params(
            NetworkSpec(sizes=(obs_dim, *self.hidden, 1)), seed=v_seed
        )

    def action_probs(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.policy, obs)[0]

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        probs = self.action_probs(obs)
        a = int(rng.choice(self.n_actions, p=probs))
        return a, float(np.log(probs[a]))

    def values(self, obs: np.ndarray) -> np.ndarray:
        return forward(self.value, obs)[0][:, 0]

    def save(self, path, step: int = 0, config_hash_: str = "", extra: dict | None = None):
        extra = dict(extra or {})
        extra["kind"] = "flat"
        extra["flat_config"] = {
            "obs_dim": self.obs_dim,
            "n_actions": self.n_actions,
            "hidden": list(self.hidden),
        }
        save_checkpoint(
            path,
            {"policy": self.policy, "value": self.value},
            step=step,
            config_hash=config_hash_,
            extra=extra,
        )

    @classmethod
    def load(cls, path) -> tuple["FlatPolicy", dict]:
        heads, manifest = load_checkpoint(path)
        raw = manifest["extra"]["flat_config"]
        flat = cls.__new__(cls)
        flat.obs_dim = raw["obs_dim"]
        flat.n_actions = raw["n_actions"]
        flat.hidden = tuple(raw["hidden"])
        flat.policy = heads["policy"]
        flat.value = heads["value"]
        return flat, manifest


class PolicyPartner:
    """Adapts a flat policy to the partner protocol."""

    def __init__(self, flat: FlatPolicy, name: str, stage: str = ""):
        self.flat = flat
        self.name = name
        self.stage = stage

    def act(self, layout, state, seat, rng) -> int:
        obs = K.observe(layout, state, seat)
        return self.flat.act(obs, rng)[0]


def load_partner(path: str | Path) -> PolicyPartner:
    flat, manifest = FlatPolicy.load(path)
    stage = manifest["extra"].get("stage", "")
    return PolicyPartner(flat, name=Path(path).stem, stage=stage)


# -------------------------------------------------------------- diversity


def jsd(*dists: np.ndarray) -> float:
    """Jensen-Shannon divergence of k distributions (natural log):
    H(mean) - mean(H). Zero iff all identical; at most log k."""
    stack = np.stack([np.asarray(d, dtype=float) for d in dists])
    mean = stack.mean(axis=0)

    def entropy(p):
        p = np.clip(p, 1e-300, 1.0)
        return float(-(p * np.log(p)).sum())

    return entropy(mean) - float(np.mean([entropy(p) for p in stack]))


def jsd_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise two-distribution Jensen-Shannon divergence."""
    m = 0.5 * (p + q)

    def h(x):
        x = np.clip(x, 1e-300, 1.0)
        return -(x * np.log(x)).sum(axis=1)

    return h(m) - 0.5 * (h(p) + h(q))


# ------------------------------------------------------- population PPO


def collect_selfplay(layout, flat: FlatPolicy, rng: np.random.Generator,
                     reward_cfg: K.RewardConfig, horizon: int):
    """One self-play episode; both seats sample from the same policy.
    Returns per-seat streams of (obs incl. final, actions, logp, rewards)."""
    T = min(horizon, layout.horizon)
    d = K.obs_dim(layout)
    obs = np.empty((2, T + 1, d))
    actions = np.empty((2, T), dtype=int)
    logps = np.empty((2, T))
    rewards = np.empty((2, T))
    state = K.reset(layout)
    for t in range(T):
        joint = []
        for seat in (0, 1):
            o = K.observe(layout, state, seat)
            obs[seat, t] = o
            a, lp = flat.act(o, rng)
            actions[seat, t] = a
            logps[seat, t] = lp
            joint.append(a)
        state, team, shaped, _ = K.step(layout, state, tuple(joint), reward_cfg)
        for seat in (0, 1):
            rewards[seat, t] = team + shaped[seat]
    for seat in (0, 1):
        obs[seat, T] = K.observe(layout, state, seat)
    return obs, actions, logps, rewards


class PopulationTrainer:
    """Trains ``pop_size`` flat self-play agents sequentially, rewarding each
    for behaving unlike the mean of its predecessors."""

    def __init__(self, cfg: PopulationConfig, run_dir: str | Path):
        self.cfg = cfg.resolve()
        self.layout = K.load_layout(self.cfg.layout)
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.horizon = (
            self.cfg.horizon if self.cfg.horizon is not None else self.layout.horizon
        )
        self.reward_cfg = K.RewardConfig(shaping_enabled=self.cfg.shaping)
        self.obs_dim = K.obs_dim(self.layout)

    def train(self) -> dict:
        cfg = self.cfg
        agents: list[FlatPolicy] = []
        manifest = {
            "layout": cfg.layout,
            "config_hash": config_hash(cfg),
            "config": asdict(cfg),
            "agents": [],
        }
        steps_per_update = cfg.n_envs * self.horizon
        n_updates = max(1, math.ceil(cfg.steps_per_agent / steps_per_update))
        stage_at = {
            max(1, math.ceil(frac * n_updates)): stage
            for frac, stage in zip(cfg.checkpoint_fractions, cfg.stage_names)
        }
        metrics_path = self.run_dir / "population_metrics.jsonl"
        with metrics_path.open("w") as metrics_file:
            for i in range(cfg.pop_size):
                flat, files = self._train_agent(i, agents, n_updates, stage_at, metrics_file)
                agents.append(flat)
                manifest["agents"].append({"index": i, "checkpoints": files})
        manifest_path = self.run_dir / "population.json"
        manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2))
        return manifest

    def _train_agent(self, index: int, predecessors: list[FlatPolicy],
                     n_updates: int, stage_at: dict[int, str], metrics_file) -> tuple:
        cfg = self.cfg
        flat = FlatPolicy(
            self.obs_dim,
            hidden=cfg.hidden,
            seed=int(np.random.default_rng([cfg.seed, index]).integers(2**31)),
        )
        files = {}
        env_steps = 0
        total = n_updates * cfg.n_envs * self.horizon
        for update in range(1, n_updates + 1):
            lr = linear_schedule(
                cfg.learning_rate, cfg.learning_rate / cfg.lr_decay_ratio,
                env_steps, total,
            )
            ent = entropy_schedule(
                env_steps, total, cfg.entropy_coef_start, cfg.entropy_coef_end
            )
            batch = [
                collect_selfplay(
                    self.layout, flat,
                    np.random.default_rng([cfg.seed, index, update, e]),
                    self.reward_cfg, self.horizon,
                )
                for e in range(cfg.n_envs)
            ]
            env_steps += cfg.n_envs * self.horizon
            stats = self._update(flat, predecessors, batch, lr, ent,
                                 np.random.default_rng([cfg.seed, index, update, 10_000]))
            stats.update({"agent": index, "update": update, "env_steps": env_steps,
                          "learning_rate": lr, "entropy_coef": ent})
            metrics_file.write(json.dumps(stats, sort_keys=True) + "\n")
            if update in stage_at:
                stage = stage_at[update]
                path = self.run_dir / f"agent{index:02d}_{stage}.ckpt"
                flat.save(path, step=env_steps, config_hash_=config_hash(cfg),
                          extra={"stage": stage, "agent": index, "layout": cfg.layout})
                files[stage] = path.name
        return flat, files

    def _update(self, flat: FlatPolicy, predecessors, batch, lr, ent_coef, rng) -> dict:
        cfg = self.cfg
        obs_list, act_list, logp_list, adv_list, target_list = [], [], [], [], []
        team_returns = []
        jsd_mean = 0.0
        for obs, actions, logps, rewards in batch:
            team_returns.append(
                float(rewards.sum() / 2)
            )  # diagnostics only; both seats share team reward
            for seat in (0, 1):
                o, a, lp, r = obs[seat], actions[seat], logps[seat], rewards[seat]
                r = r.copy()
                if predecessors and cfg.jsd_weight > 0:
                    cur = flat.action_probs(o[:-1])
                    prev = np.mean(
                        [p.action_probs(o[:-1]) for p in predecessors], axis=0
                    )
                    bonus = cfg.jsd_weight * jsd_rows(cur, prev)
                    r += bonus
                    jsd_mean += float(bonus.mean())
                values = flat.values(o)
                adv = gae(
                    r, values[:-1], float(values[-1]),
                    np.zeros(len(r)), cfg.gamma, cfg.gae_lambda,
                )
                obs_list.append(o[:-1])
                act_list.append(a)
                logp_list.append(lp)
                adv_list.append(adv)
                target_list.append(adv + values[:-1])
        inputs = np.concatenate(obs_list)
        actions = np.concatenate(act_list)
        logp_old = np.concatenate(logp_list)
        advantages = normalize_advantages(np.concatenate(adv_list))
        targets = np.concatenate(target_list)

        n = inputs.shape[0]
        n_minibatches = max(1, math.ceil(n / cfg.batch_size))
        kl = clip_frac = entropy = v_loss = 0.0
        count = 0
        for _ in range(cfg.n_epochs):
            for idx in minibatch_slices(n, n_minibatches, rng):
                if idx.size == 0:
                    continue
                g_pi, stats = categorical_policy_terms(
                    flat.policy, inputs[idx], actions[idx], logp_old[idx],
                    advantages[idx], cfg.clip_eps, ent_coef,
                )
                g_v, loss_v = value_terms(
                    flat.value, inputs[idx], targets[idx], cfg.value_coef
                )
                clip_by_global_norm([g_pi, g_v], cfg.max_grad_norm)
                adam_step(flat.policy, g_pi, lr)
                adam_step(flat.value, g_v, lr)
                kl += stats.approx_kl
                clip_frac += stats.clip_fraction
                entropy += stats.entropy
                v_loss += loss_v
                count += 1
        return {
            "team_return": float(np.mean(team_returns)),
            "jsd_bonus": jsd_mean / (2 * len(batch)),
            "approx_kl": kl / count,
            "clip_fraction": clip_frac / count,
            "entropy": entropy / count,
            "value_loss": v_loss / count,
        }


def population_partners(run_dir: str | Path, stages=None) -> list[PolicyPartner]:
    """Load every (agent, stage) checkpoint recorded in a population manifest."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "population.json").read_text())
    partners = []
    for agent in manifest["agents"]:
        for stage, fname in sorted(agent["checkpoints"].items()):
            if stages is not None and stage not in stages:
                continue
            partners.append(load_partner(run_dir / fname))
    return partners
