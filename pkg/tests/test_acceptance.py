"""Acceptance suite: one test per headline requirement.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured
quantity next to its threshold, then asserts. The desk-scale training run
(two arms x three seeds plus a random baseline) is shared by the learning
and skill-structure checks through a module-scoped fixture.
"""

import math
import time

import numpy as np
import pytest

from oracles import gae_bruteforce, reference_contrastive
from test_nets import run_gradient_check_suite
from test_ppo import run_bandit

from pasd import kitchen as K
from pasd.config import TrainConfig
from pasd.contrast import contrastive_terms, mi_lower_bound
from pasd.evaluate import (
    HierActor,
    RandomActor,
    evaluate,
    skill_cosine_gap,
    skill_window_embeddings,
)
from pasd.population import make_scripted
from pasd.ppo import entropy_schedule, gae, mixing_schedule
from pasd.rollout import replay_joint_actions
from pasd.trainer import PASDTrainer


def report(label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}", flush=True)
    assert ok, f"{label}: {detail}"


# ------------------------------------------------- 1. gradient correctness


def test_gradients_match_central_differences():
    start = time.perf_counter()
    worst = run_gradient_check_suite(n_cases=120, eps=1e-5)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 60.0
    report(
        "gradient check vs central differences",
        ok,
        f"worst relative error {worst:.2e} over 120 cases, "
        f"every output transform, {elapsed:.1f}s",
    )


# --------------------------------------------------------- 2. GAE oracle


def test_advantage_recursion_matches_bruteforce_expansion():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 21))
        rewards = rng.standard_normal(T)
        values = rng.standard_normal(T)
        bootstrap = float(rng.standard_normal())
        dones = (rng.random(T) < 0.2).astype(float)
        gamma = float(rng.uniform(0.8, 1.0))
        lam = float(rng.uniform(0.5, 1.0))
        fast = gae(rewards, values, bootstrap, dones, gamma, lam)
        slow = gae_bruteforce(rewards, values, bootstrap, dones, gamma, lam)
        worst = max(worst, float(np.max(np.abs(fast - slow))))
    ok = worst <= 1e-10
    report(
        "advantage recursion vs explicit discounted-delta sum",
        ok,
        f"max abs deviation {worst:.2e} over 1000 sequences (len <= 20)",
    )


# ----------------------------------------------- 3. contrastive identities


def test_contrastive_reward_identities():
    rng = np.random.default_rng(7)
    tau = 0.1
    worst_ref = 0.0
    worst_jensen = -np.inf
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        d = int(rng.integers(2, 9))
        emb = rng.standard_normal((n, d))
        emb /= np.linalg.norm(emb, axis=1, keepdims=True)
        ids = rng.integers(0, 4, size=n)
        loss, rewards, _, diag = contrastive_terms(emb, ids, tau)
        ref_loss, ref_losses, ref_rewards = reference_contrastive(emb, ids, tau)
        worst_ref = max(
            worst_ref,
            abs(loss - ref_loss),
            float(np.max(np.abs(rewards - ref_rewards))),
        )
        anchored = ~np.isnan(ref_losses)
        assert ((rewards[anchored] > 0) & (rewards[anchored] <= 1)).all()
        assert (rewards[~anchored] == 0).all()
        if anchored.any():
            # per-anchor Jensen bound: -log(mean prob) <= mean(-log prob)
            worst_jensen = max(
                worst_jensen,
                float(np.max(-np.log(rewards[anchored]) - ref_losses[anchored])),
            )
        assert diag["mi_lower_bound"] == mi_lower_bound(n, loss)

    # all-identical embeddings: every softmax term equal, reward exactly
    # 1/(number of other windows) regardless of the positive count
    for n in (2, 3, 5, 8, 13):
        emb = np.tile(rng.standard_normal(4), (n, 1))
        emb /= np.linalg.norm(emb, axis=1, keepdims=True)
        ids = rng.integers(0, 3, size=n)
        _, rewards, _, _ = contrastive_terms(emb, ids, tau)
        for i, r in enumerate(rewards):
            if (np.delete(ids, i) == ids[i]).any():
                assert r == 1.0 / (n - 1)

    assert mi_lower_bound(16, 0.0) == np.log(16)
    ok = worst_ref <= 1e-10 and worst_jensen <= 1e-9
    report(
        "contrastive reward identities",
        ok,
        f"reward/loss vs naive oracle within {worst_ref:.2e}, "
        f"-log(reward) <= per-anchor loss (worst slack {worst_jensen:.2e}), "
        f"uniform-similarity value exact, zero-loss bound = log N; "
        f"1000 batches",
    )


# ------------------------------------------------------------ 4. schedules


def test_annealing_schedules_are_linear_with_pinned_endpoints():
    total = 1000.0
    assert mixing_schedule(0.0, total) == 1.0
    assert mixing_schedule(total, total) == 0.05
    assert entropy_schedule(0.0, total) == 0.01
    assert entropy_schedule(total, total) == 0.0
    exact = True
    for k in range(10):
        t = total * k / 10.0
        frac = t / total
        exact &= mixing_schedule(t, total) == (1.0 - frac) * 1.0 + frac * 0.05
        exact &= entropy_schedule(t, total) == (1.0 - frac) * 0.01 + frac * 0.0
    report(
        "annealing schedules",
        exact,
        "mixing 1.0 -> 0.05 and entropy 0.01 -> 0.0, linear at 10 probe "
        "points exactly, endpoints pinned",
    )


# ------------------------------------------------ 5. environment accounting


def test_environment_accounting_and_bit_exact_replay():
    rng = np.random.default_rng(123)
    layouts = [K.load_layout(name) for name in K.bundled_layout_names()]
    episodes = 1000
    horizon = 50
    for ep in range(episodes):
        layout = layouts[ep % len(layouts)]
        state = K.reset(layout)
        joint_log = np.empty((horizon, 2), dtype=int)
        team_log = np.empty(horizon)
        picked = delivered = 0
        team_total = 0.0
        for t in range(horizon):
            joint = (int(rng.integers(6)), int(rng.integers(6)))
            state, r, _, evs = K.step(layout, state, joint)
            joint_log[t] = joint
            team_log[t] = r
            team_total += r
            picked += sum(1 for e in evs if e.kind == "onion_pickup")
            delivered += sum(1 for e in evs if e.kind == "delivery")
            in_hands = sum(1 for h in state.held if h == K.ONION)
            in_soup_hands = sum(3 for h in state.held if h == K.SOUP)
            on_counters = sum(1 for c in state.counters if c == K.ONION)
            soup_counters = sum(3 for c in state.counters if c == K.SOUP)
            in_pots = sum(count for count, _ in state.pots)
            conserved = (
                in_hands + in_soup_hands + on_counters + soup_counters + in_pots
                + 3 * delivered
            )
            assert conserved == picked, f"onion imbalance on {layout.name}"
        assert team_total == 20.0 * delivered
        final, team_replay, _ = replay_joint_actions(layout, joint_log)
        assert final == state
        assert np.array_equal(team_replay, team_log)
    report(
        "environment accounting",
        True,
        f"team reward = 20 x deliveries, onion conservation, and bit-exact "
        f"replay on {episodes} random-action episodes across "
        f"{len(layouts)} layouts",
    )


# ------------------------------------------------------ 6. optimizer sanity


def test_ppo_learns_two_armed_bandit():
    start = time.perf_counter()
    p_optimal = run_bandit(seed=0, n_updates=200)
    elapsed = time.perf_counter() - start
    ok = p_optimal > 0.9 and elapsed < 60.0
    report(
        "flat-policy optimizer sanity",
        ok,
        f"P(optimal arm) = {p_optimal:.3f} after 200 updates "
        f"({elapsed:.1f}s)",
    )


# ------------------------------------- 7+8. desk-scale end-to-end learning

DESK_LAYOUT = "cramped_small"
DESK_PARTNERS = ("onion_specialist", "dish_specialist")
DESK_SEEDS = (0, 1, 2)


def desk_config(seed: int, intrinsic: bool) -> TrainConfig:
    return TrainConfig(
        layout=DESK_LAYOUT,
        seed=seed,
        total_steps=200_000,
        n_envs=8,
        horizon=200,
        partners=DESK_PARTNERS,
        hidden=(32, 32),
        mixing_start=1.0 if intrinsic else 0.0,
        mixing_end=0.05 if intrinsic else 0.0,
        term_entropy_coef=0.05,
        embed_epochs=4,
        embed_learning_rate=3e-3,
    )


@pytest.fixture(scope="module")
def desk_runs():
    start = time.perf_counter()
    layout = K.load_layout(DESK_LAYOUT)
    partners = [make_scripted(name) for name in DESK_PARTNERS]
    out = {"full": [], "ablation": [], "random": [], "gap": []}
    for seed in DESK_SEEDS:
        for arm, intrinsic in (("full", True), ("ablation", False)):
            trainer = PASDTrainer(desk_config(seed, intrinsic))
            while trainer.env_steps < trainer.cfg.total_steps:
                trainer.iterate()
            ev = evaluate(
                layout, HierActor(trainer.policy), partners,
                episodes_per_pair=5, seed=seed + 1000,
            )
            out[arm].append(ev["overall_mean"])
            if intrinsic:
                emb, ids = skill_window_embeddings(
                    trainer.policy, layout, partners,
                    n_rollouts=30, seed=seed + 2000, horizon=200,
                )
                out["gap"].append(skill_cosine_gap(emb, ids))
        out["random"].append(evaluate(
            layout, RandomActor(), partners,
            episodes_per_pair=5, seed=seed + 1000,
        )["overall_mean"])
    out["elapsed"] = time.perf_counter() - start
    return out


def test_desk_scale_learning_beats_baselines(desk_runs):
    full = float(np.mean(desk_runs["full"]))
    ablation = float(np.mean(desk_runs["ablation"]))
    random_mean = float(np.mean(desk_runs["random"]))
    elapsed = desk_runs["elapsed"]
    ok = full >= 5.0 * random_mean and full > ablation and elapsed < 1800.0
    report(
        "desk-scale learning",
        ok,
        f"mean return {full:.2f} vs 5x random {5.0 * random_mean:.2f} "
        f"and extrinsic-only ablation {ablation:.2f} on shared seeds "
        f"(per-seed {desk_runs['full']} vs {desk_runs['ablation']}, "
        f"random {desk_runs['random']}; 2x10^5 steps x 3 seeds x 2 arms "
        f"in {elapsed:.0f}s)",
    )


def test_skill_similarity_gap_positive_each_seed(desk_runs):
    gaps = desk_runs["gap"]
    ok = all(math.isfinite(g) and g > 0.0 for g in gaps)
    report(
        "skill-structure separation",
        ok,
        "intra-skill minus inter-skill mean cosine similarity per seed: "
        + ", ".join(f"{g:+.4f}" for g in gaps),
    )


# ---------------------------------------------------------- 9. determinism


def test_command_reruns_are_byte_identical(tmp_path):
    from pasd.cli import main

    train_flags = [
        "--layout", "cramped_small", "--seed", "3", "--total-steps", "320",
        "--n-envs", "2", "--horizon", "40", "--n-skills", "3",
        "--hidden", "16", "--embed-dim", "8", "--batch-size", "40",
        "--partners", "onion_specialist,dish_specialist",
    ]
    for d in ("train_a", "train_b"):
        assert main(["train-pasd", "--out", str(tmp_path / d), *train_flags]) == 0
    same_metrics = (
        (tmp_path / "train_a" / "metrics.jsonl").read_bytes()
        == (tmp_path / "train_b" / "metrics.jsonl").read_bytes()
    )
    same_ckpt = (
        (tmp_path / "train_a" / "policy_final.ckpt").read_bytes()
        == (tmp_path / "train_b" / "policy_final.ckpt").read_bytes()
    )

    eval_flags = [
        "--checkpoint", str(tmp_path / "train_a" / "policy_final.ckpt"),
        "--partners", "uniform_random", "--episodes", "2",
        "--seed", "0", "--horizon", "40", "--probe-rollouts", "8",
        "--metrics", str(tmp_path / "train_a" / "metrics.jsonl"),
    ]
    for d in ("eval_a", "eval_b"):
        assert main(["evaluate", "--out", str(tmp_path / d), *eval_flags]) == 0
    same_eval = all(
        (tmp_path / "eval_a" / name).read_bytes()
        == (tmp_path / "eval_b" / name).read_bytes()
        for name in ("report.json", "episodes.jsonl", "heatmap.png",
                     "training_curves.png")
    )
    ok = same_metrics and same_ckpt and same_eval
    report(
        "rerun determinism",
        ok,
        f"training metrics+checkpoint byte-identical: "
        f"{same_metrics and same_ckpt}; evaluation report, episode log and "
        f"plots byte-identical: {same_eval}",
    )
