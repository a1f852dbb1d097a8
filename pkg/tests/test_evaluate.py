"""Evaluation harness: seeding, grouping, and the skill-separation probe."""

import json
import math

import numpy as np

from pasd import kitchen as K
from pasd.evaluate import (
    HierActor,
    RandomActor,
    evaluate,
    run_episode,
    skill_cosine_gap,
    skill_window_embeddings,
)
from pasd.policy import HierarchicalPolicy, PolicyConfig
from pasd.population import make_scripted

SMALL = K.load_layout("cramped_small")


def make_policy(seed=1):
    return HierarchicalPolicy(
        PolicyConfig(obs_dim=K.obs_dim(SMALL), n_skills=3, hidden=(16,)), seed=seed
    )


def test_run_episode_counts_team_reward_only():
    # two specialists complete soups regardless of which one is the "actor"
    class Wrap:
        name = "onion_specialist"

        def __init__(self):
            self.inner = make_scripted("onion_specialist")

        def reset(self):
            pass

        def act(self, layout, state, seat, rng):
            return self.inner.act(layout, state, seat, rng)

    result = run_episode(
        SMALL, Wrap(), make_scripted("dish_specialist"), seat=0,
        actor_rng=np.random.default_rng(0), partner_rng=np.random.default_rng(1),
    )
    assert result["deliveries"] >= 3
    assert result["team_return"] == 20.0 * result["deliveries"]
    assert result["length"] == SMALL.horizon


def test_evaluate_structure_and_determinism():
    policy = make_policy()
    actor = HierActor(policy)
    partners = [make_scripted("stationary"), make_scripted("uniform_random")]
    a = evaluate(SMALL, actor, partners, episodes_per_pair=2, seed=3, horizon=30)
    b = evaluate(SMALL, actor, partners, episodes_per_pair=2, seed=3, horizon=30)
    assert a == b
    assert set(a["per_partner"]) == {"stationary", "uniform_random"}
    for entry in a["per_partner"].values():
        assert entry["episodes"] == 4  # 2 per seat
    means = [e["mean"] for e in a["per_partner"].values()]
    assert a["overall_mean"] == float(np.mean(means))

    c = evaluate(SMALL, actor, partners, episodes_per_pair=2, seed=4, horizon=30)
    assert c["episodes_per_pair"] == 2


def test_evaluate_writes_episode_log(tmp_path):
    log = tmp_path / "episodes.jsonl"
    evaluate(
        SMALL, RandomActor(), [make_scripted("stationary")],
        episodes_per_pair=2, seed=0, horizon=10, log_path=log,
    )
    rows = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(rows) == 4
    assert {r["seat"] for r in rows} == {0, 1}
    assert all(r["partner"] == "stationary" and r["length"] == 10 for r in rows)


def test_evaluate_groups_stages():
    class StagedPartner:
        def __init__(self, name, stage):
            self.name = name
            self.stage = stage

        def act(self, layout, state, seat, rng):
            return K.STAY

    partners = [StagedPartner("a_final", "final"), StagedPartner("b_final", "final")]
    out = evaluate(SMALL, RandomActor(), partners, episodes_per_pair=1, horizon=5)
    assert "by_stage" in out
    assert set(out["by_stage"]) == {"final"}


def test_skill_window_embeddings_are_unit_norm():
    policy = make_policy()
    emb, ids = skill_window_embeddings(
        policy, SMALL, [make_scripted("stationary")],
        n_rollouts=4, seed=2, horizon=60, window=5, min_window=3,
    )
    assert emb.shape[1] == policy.config.embed_dim
    assert len(emb) == len(ids)
    if len(emb):
        np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-9)
        assert set(ids) <= set(range(policy.config.n_skills))


def test_skill_cosine_gap_identities():
    # two tight clusters on orthogonal axes: intra ~ 1, inter ~ 0
    e = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    ids = np.array([0, 0, 1, 1])
    assert math.isclose(skill_cosine_gap(e, ids), 1.0, abs_tol=1e-12)

    # identical embeddings for every skill: no separation
    same = np.tile([1.0, 0.0], (4, 1))
    assert math.isclose(skill_cosine_gap(same, ids), 0.0, abs_tol=1e-12)

    # degenerate inputs give NaN rather than a misleading number
    assert math.isnan(skill_cosine_gap(e[:1], ids[:1]))
    assert math.isnan(skill_cosine_gap(e[:2], np.array([0, 0])))
