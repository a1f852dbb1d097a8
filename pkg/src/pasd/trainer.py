"""Hierarchical training loop.

Each iteration: collect partner-paired rollouts with the current skill
hierarchy, cut constant-skill windows and score them with the contrastive
head (one optimizer step on its loss), broadcast the resulting per-window
intrinsic rewards back onto timesteps, mix them with the environment reward
(annealed weight), run generalized advantage estimation separately for the
skill selector (segment-level, undiscounted within-segment average reward)
and the controller (per-step), then several epochs of clipped-surrogate
updates over minibatches for all heads at once.

The intrinsic weight anneals linearly to nearly zero, so early training is
dominated by skill separation and late training by task reward. The mixing
is intentionally asymmetric between levels: the selector sees a convex
combination while the controller sees the environment reward plus a scaled
intrinsic bonus (``symmetric_mixing`` switches the controller to the convex
form for ablations).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import kitchen as K
from .config import TrainConfig, config_hash
from .contrast import ContrastConfig, segment_skills, update_embedding
from .nets import adam_step, clip_by_global_norm, forward
from .policy import HierarchicalPolicy, PolicyConfig
from .population import load_partner, make_scripted, population_partners, SCRIPTED_PARTNERS
from .ppo import (
    bernoulli_policy_terms,
    categorical_policy_terms,
    entropy_schedule,
    gae,
    linear_schedule,
    minibatch_slices,
    normalize_advantages,
    value_terms,
)
from .rollout import collect_batch


def mix_low_level(rewards, intrinsic, lam, symmetric=False):
    """Controller reward stream. Default: environment reward plus the
    annealed intrinsic bonus. Symmetric variant: convex combination, same
    form the selector sees."""
    if symmetric:
        return (1.0 - lam) * rewards + lam * intrinsic
    return rewards + lam * intrinsic


def mix_high_level(rewards, intrinsic, lam, segments):
    """Selector reward per decision segment: per-step convex mix with the
    intrinsic reward, averaged over the steps the chosen skill ran."""
    mixed = (1.0 - lam) * rewards + lam * intrinsic
    return np.array([mixed[s:e].mean() for s, e, _ in segments])


def resolve_partners(specs) -> list:
    """Partner specs: scripted names, checkpoint paths, or
    ``population:<dir>`` for a whole population manifest."""
    partners = []
    for spec in specs:
        if spec in SCRIPTED_PARTNERS:
            partners.append(make_scripted(spec))
        elif spec.startswith("population:"):
            partners.extend(population_partners(spec.split(":", 1)[1]))
        elif spec.endswith(".ckpt"):
            partners.append(load_partner(spec))
        else:
            raise ValueError(
                f"unknown partner spec {spec!r}: expected a scripted partner "
                f"({', '.join(sorted(SCRIPTED_PARTNERS))}), a .ckpt path, or population:<dir>"
            )
    if not partners:
        raise ValueError("no partners specified")
    return partners


class PASDTrainer:
    def __init__(self, cfg: TrainConfig, run_dir: str | Path | None = None):
        self.cfg = cfg.resolve()
        self.layout = K.load_layout(self.cfg.layout)
        self.horizon = (
            self.cfg.horizon if self.cfg.horizon is not None else self.layout.horizon
        )
        self.reward_cfg = K.RewardConfig(shaping_enabled=self.cfg.shaping)
        self.policy = HierarchicalPolicy(
            PolicyConfig(
                obs_dim=K.obs_dim(self.layout),
                n_skills=self.cfg.n_skills,
                n_actions=K.N_ACTIONS,
                hidden=tuple(self.cfg.hidden),
                embed_dim=self.cfg.embed_dim,
            ),
            seed=self.cfg.seed,
        )
        self.partners = resolve_partners(self.cfg.partners)
        self.contrast_cfg = ContrastConfig(
            temperature=self.cfg.temperature,
            window=self.cfg.window,
            min_window=self.cfg.min_window,
        )
        self.run_dir = Path(run_dir) if run_dir is not None else None
        if self.run_dir is not None:
            self.run_dir.mkdir(parents=True, exist_ok=True)
        self.env_steps = 0
        self.iteration = 0

    # ------------------------------------------------------------ spans

    def schedules(self) -> dict[str, float]:
        cfg, t, total = self.cfg, self.env_steps, self.cfg.total_steps
        if cfg.term_entropy_coef is None:
            term_ent = entropy_schedule(
                t, total, cfg.entropy_coef_start, cfg.entropy_coef_end
            )
        else:
            term_ent = linear_schedule(cfg.term_entropy_coef, 0.0, t, total)
        return {
            "mixing": linear_schedule(cfg.mixing_start, cfg.mixing_end, t, total),
            "entropy_coef": entropy_schedule(
                t, total, cfg.entropy_coef_start, cfg.entropy_coef_end
            ),
            "term_entropy_coef": term_ent,
            "learning_rate": linear_schedule(
                cfg.learning_rate, cfg.learning_rate / cfg.lr_decay_ratio, t, total
            ),
        }

    def iterate(self) -> dict:
        cfg = self.cfg
        sched = self.schedules()
        lam, ent_coef, lr, term_ent = (
            sched["mixing"],
            sched["entropy_coef"],
            sched["learning_rate"],
            sched["term_entropy_coef"],
        )

        rollouts = collect_batch(
            self.layout,
            self.policy,
            self.partners,
            cfg.n_envs,
            seed_path=(cfg.seed, self.iteration),
            reward_cfg=self.reward_cfg,
            horizon=self.horizon,
        )

        # ---- contrastive windows and intrinsic rewards
        window_rng = np.random.default_rng([cfg.seed, self.iteration, 2])
        windows = []
        for i, r in enumerate(rollouts):
            windows.extend(
                segment_skills(r.skills, self.contrast_cfg, window_rng, rollout=i)
            )
        intrinsic = [np.zeros(r.length) for r in rollouts]
        contrast_diag = {"n_windows": 0, "n_anchored": 0, "mean_reward": 0.0,
                         "mi_lower_bound": 0.0}
        infonce_loss = 0.0
        if windows:
            rep_obs = np.stack([rollouts[w.rollout].obs[w.rep] for w in windows])
            ids = np.array([w.skill for w in windows])
            embed_lr = (
                cfg.embed_learning_rate if cfg.embed_learning_rate is not None else lr
            )
            infonce_loss, window_rewards, contrast_diag = update_embedding(
                self.policy.heads["embed"], rep_obs, ids, cfg.temperature, embed_lr,
                n_steps=cfg.embed_epochs,
            )
            for w, rew in zip(windows, window_rewards):
                intrinsic[w.rollout][w.start:w.end] = rew

        # ---- advantage estimation
        heads = self.policy.heads
        lo_inputs, lo_actions, lo_logp, lo_adv, lo_tgt = [], [], [], [], []
        hi_inputs, hi_actions, hi_logp, hi_adv, hi_tgt = [], [], [], [], []
        tm_inputs, tm_outcomes, tm_logp, tm_adv = [], [], [], []

        for i, r in enumerate(rollouts):
            T = r.length
            r_int = intrinsic[i]
            mixed_lo = mix_low_level(r.rewards, r_int, lam, cfg.symmetric_mixing)

            cond = self.policy.conditioned(r.obs[:T], r.skills)
            v_lo = forward(heads["v_lo"], cond)[0][:, 0]
            boot_lo = float(
                forward(heads["v_lo"], self.policy.conditioned(r.obs[T], int(r.skills[-1])))[0][0]
            )
            adv_lo = gae(mixed_lo, v_lo, boot_lo, np.zeros(T), cfg.gamma, cfg.gae_lambda)
            lo_inputs.append(cond)
            lo_actions.append(r.actions)
            lo_logp.append(r.logp_actions)
            lo_adv.append(adv_lo)
            lo_tgt.append(adv_lo + v_lo)

            segs = r.segments()
            seg_rewards = mix_high_level(r.rewards, r_int, lam, segs)
            dec_obs = r.obs[[s for s, _, _ in segs]]
            v_hi = forward(heads["v_hi"], dec_obs)[0][:, 0]
            boot_hi = float(forward(heads["v_hi"], r.obs[T])[0][0])
            adv_hi = gae(
                seg_rewards, v_hi, boot_hi, np.zeros(len(segs)), cfg.gamma, cfg.gae_lambda
            )
            hi_inputs.append(dec_obs)
            hi_actions.append(np.array([z for _, _, z in segs], dtype=int))
            hi_logp.append(np.array([d.logp for d in r.decisions]))
            hi_adv.append(adv_hi)
            hi_tgt.append(adv_hi + v_hi)

            if r.terminations:
                seg_of = r.segment_of_step()
                t_idx = np.array([ts.t for ts in r.terminations])
                prev = np.array([ts.prev_skill for ts in r.terminations], dtype=int)
                outcomes = np.array([ts.outcome for ts in r.terminations])
                tm_inputs.append(self.policy.conditioned(r.obs[t_idx], prev))
                tm_outcomes.append(outcomes)
                tm_logp.append(np.array([ts.logp for ts in r.terminations]))
                if cfg.termination_advantage_mode == "segment_gae":
                    # credit the segment that was active when the coin was
                    # flipped: keep it when it is outperforming, cut it when
                    # it is not
                    seg_idx = seg_of[t_idx - 1]
                    base = adv_hi[seg_idx]
                else:  # option_critic: continue-vs-redraw comparison in
                    # matching per-step-return units — the incumbent skill's
                    # value against the selector-weighted value of a fresh
                    # draw at the same state.  Positive means the incumbent
                    # is still the best bet, so keeping it is reinforced.
                    obs_here = r.obs[t_idx]
                    v_inc = forward(
                        heads["v_lo"], self.policy.conditioned(obs_here, prev)
                    )[0][:, 0]
                    probs_here = forward(heads["hi"], obs_here)[0]
                    v_redraw = np.zeros(len(t_idx))
                    for z in range(cfg.n_skills):
                        zcol = np.full(len(t_idx), z, dtype=int)
                        v_redraw += probs_here[:, z] * forward(
                            heads["v_lo"], self.policy.conditioned(obs_here, zcol)
                        )[0][:, 0]
                    base = v_inc - v_redraw
                tm_adv.append((1.0 - 2.0 * outcomes) * base)

        lo_inputs = np.concatenate(lo_inputs)
        lo_actions = np.concatenate(lo_actions)
        lo_logp = np.concatenate(lo_logp)
        lo_adv = normalize_advantages(np.concatenate(lo_adv))
        lo_tgt = np.concatenate(lo_tgt)
        hi_inputs = np.concatenate(hi_inputs)
        hi_actions = np.concatenate(hi_actions)
        hi_logp = np.concatenate(hi_logp)
        hi_adv = normalize_advantages(np.concatenate(hi_adv))
        hi_tgt = np.concatenate(hi_tgt)
        if tm_inputs:
            tm_inputs = np.concatenate(tm_inputs)
            tm_outcomes = np.concatenate(tm_outcomes)
            tm_logp = np.concatenate(tm_logp)
            # scale only: centering would flip the sign structure that ties
            # keep/stop outcomes to the same segment estimate
            tm_adv = normalize_advantages(np.concatenate(tm_adv), center=False)
        else:
            tm_inputs = np.zeros((0, lo_inputs.shape[1]))
            tm_outcomes = np.zeros(0, dtype=int)
            tm_logp = np.zeros(0)
            tm_adv = np.zeros(0)

        # ---- clipped-surrogate epochs
        n_lo = lo_inputs.shape[0]
        n_minibatches = max(1, math.ceil(n_lo / cfg.batch_size))
        epoch_rng = np.random.default_rng([cfg.seed, self.iteration, 3])
        agg = {"kl_lo": 0.0, "kl_hi": 0.0, "clip_lo": 0.0, "entropy_lo": 0.0,
               "entropy_hi": 0.0, "v_lo_loss": 0.0, "v_hi_loss": 0.0, "n": 0}
        for _ in range(cfg.n_epochs):
            lo_parts = minibatch_slices(n_lo, n_minibatches, epoch_rng)
            hi_parts = minibatch_slices(hi_inputs.shape[0], n_minibatches, epoch_rng)
            tm_parts = minibatch_slices(tm_inputs.shape[0], n_minibatches, epoch_rng)
            for lo_idx, hi_idx, tm_idx in zip(lo_parts, hi_parts, tm_parts):
                grads = {}
                stats_lo = stats_hi = None
                if lo_idx.size:
                    grads["lo"], stats_lo = categorical_policy_terms(
                        heads["lo"], lo_inputs[lo_idx], lo_actions[lo_idx],
                        lo_logp[lo_idx], lo_adv[lo_idx], cfg.clip_eps, ent_coef,
                    )
                    grads["v_lo"], v_lo_loss = value_terms(
                        heads["v_lo"], lo_inputs[lo_idx], lo_tgt[lo_idx], cfg.value_coef
                    )
                if hi_idx.size:
                    grads["hi"], stats_hi = categorical_policy_terms(
                        heads["hi"], hi_inputs[hi_idx], hi_actions[hi_idx],
                        hi_logp[hi_idx], hi_adv[hi_idx], cfg.clip_eps, ent_coef,
                    )
                    grads["v_hi"], v_hi_loss = value_terms(
                        heads["v_hi"], hi_inputs[hi_idx], hi_tgt[hi_idx], cfg.value_coef
                    )
                if tm_idx.size:
                    grads["term"], _ = bernoulli_policy_terms(
                        heads["term"], tm_inputs[tm_idx], tm_outcomes[tm_idx],
                        tm_logp[tm_idx], tm_adv[tm_idx], cfg.clip_eps, term_ent,
                    )
                if not grads:
                    continue
                clip_by_global_norm(list(grads.values()), cfg.max_grad_norm)
                for name, g in grads.items():
                    adam_step(heads[name], g, lr)
                if stats_lo is not None:
                    agg["kl_lo"] += stats_lo.approx_kl
                    agg["clip_lo"] += stats_lo.clip_fraction
                    agg["entropy_lo"] += stats_lo.entropy
                    agg["v_lo_loss"] += v_lo_loss
                if stats_hi is not None:
                    agg["kl_hi"] += stats_hi.approx_kl
                    agg["entropy_hi"] += stats_hi.entropy
                    agg["v_hi_loss"] += v_hi_loss
                agg["n"] += 1

        steps_collected = sum(r.length for r in rollouts)
        self.env_steps += steps_collected
        self.iteration += 1

        skill_counts = np.zeros(cfg.n_skills)
        seg_lengths = []
        for r in rollouts:
            for s, e, z in r.segments():
                skill_counts[z] += e - s
                seg_lengths.append(e - s)
        n_mb = max(agg["n"], 1)
        return {
            "iteration": self.iteration,
            "env_steps": self.env_steps,
            "mixing_lambda": lam,
            "entropy_coef": ent_coef,
            "learning_rate": lr,
            "team_return_mean": float(np.mean([r.team_return for r in rollouts])),
            "env_return_mean": float(np.mean([r.rewards.sum() for r in rollouts])),
            "infonce_loss": infonce_loss,
            "intrinsic_mean": contrast_diag["mean_reward"],
            "mi_lower_bound": contrast_diag["mi_lower_bound"],
            "n_windows": contrast_diag["n_windows"],
            "n_anchored": contrast_diag["n_anchored"],
            "mean_segment_length": float(np.mean(seg_lengths)) if seg_lengths else 0.0,
            "skill_usage": (skill_counts / max(skill_counts.sum(), 1)).tolist(),
            "approx_kl_lo": agg["kl_lo"] / n_mb,
            "approx_kl_hi": agg["kl_hi"] / n_mb,
            "clip_fraction_lo": agg["clip_lo"] / n_mb,
            "entropy_lo": agg["entropy_lo"] / n_mb,
            "entropy_hi": agg["entropy_hi"] / n_mb,
            "value_loss_lo": agg["v_lo_loss"] / n_mb,
            "value_loss_hi": agg["v_hi_loss"] / n_mb,
        }

    def load_state(self, path) -> None:
        """Restore parameters, optimizer accumulators, and step counters
        from a checkpoint written by :meth:`save`, so continued training
        produces the same iterations a never-interrupted run would."""
        policy, manifest = HierarchicalPolicy.load(path)
        expected = config_hash(self.cfg)
        found = manifest.get("config_hash", "")
        if found and found != expected:
            raise ValueError(
                f"{path}: checkpoint was written under a different config "
                f"(hash {found}, expected {expected})"
            )
        if policy.config != self.policy.config:
            raise ValueError(f"{path}: checkpoint policy shape mismatch")
        self.policy.heads = policy.heads
        self.env_steps = int(manifest.get("step", 0))
        self.iteration = int(manifest.get("extra", {}).get("iteration", 0))

    def train(self, on_iteration=None) -> dict:
        cfg = self.cfg
        metrics_file = None
        if self.run_dir is not None:
            (self.run_dir / "config.json").write_text(
                json.dumps(asdict(cfg), sort_keys=True, indent=2, default=list)
            )
            mode = "a" if self.iteration > 0 else "w"
            metrics_file = (self.run_dir / "metrics.jsonl").open(mode)
        last = {}
        try:
            while self.env_steps < cfg.total_steps:
                last = self.iterate()
                if metrics_file is not None:
                    metrics_file.write(json.dumps(last, sort_keys=True) + "\n")
                    metrics_file.flush()
                if on_iteration is not None:
                    on_iteration(last)
                if (
                    self.run_dir is not None
                    and cfg.checkpoint_every
                    and self.iteration % cfg.checkpoint_every == 0
                ):
                    self.save(self.run_dir / f"policy_iter{self.iteration:05d}.ckpt")
        finally:
            if metrics_file is not None:
                metrics_file.close()
        if self.run_dir is not None:
            self.save(self.run_dir / "policy_final.ckpt")
        return last

    def save(self, path):
        self.policy.save(
            path,
            step=self.env_steps,
            config_hash=config_hash(self.cfg),
            extra={"layout": self.cfg.layout, "iteration": self.iteration},
        )
