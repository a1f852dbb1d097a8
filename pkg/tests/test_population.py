"""Scripted partner archetypes, diversity measures, and the self-play pool."""

import json
import math

import numpy as np
import pytest

from pasd import kitchen as K
from pasd.config import PopulationConfig
from pasd.population import (
    SCRIPTED_PARTNERS,
    FlatPolicy,
    PopulationTrainer,
    collect_selfplay,
    jsd,
    jsd_rows,
    load_partner,
    make_scripted,
    population_partners,
    ring_cycle,
)

SMALL = K.load_layout("cramped_small")
RING = K.load_layout("coordination_ring")


def run_pair(layout, a, b, ticks, seed=1):
    rng = np.random.default_rng(seed)
    state = K.reset(layout)
    team = 0.0
    events = []
    for _ in range(ticks):
        acts = (a.act(layout, state, 0, rng), b.act(layout, state, 1, rng))
        state, tr, _, evs = K.step(layout, state, acts)
        team += tr
        events.extend(evs)
    return state, team, events


def count(events, kind):
    return sum(1 for e in events if e.kind == kind)


def test_registry_contents():
    assert set(SCRIPTED_PARTNERS) == {
        "stationary",
        "uniform_random",
        "onion_specialist",
        "dish_specialist",
        "clockwise",
        "counterclockwise",
    }
    for name in SCRIPTED_PARTNERS:
        assert make_scripted(name).name == name
    with pytest.raises(ValueError, match="unknown scripted partner"):
        make_scripted("sous_chef")


def test_stationary_stays():
    p = make_scripted("stationary")
    state = K.reset(SMALL)
    rng = np.random.default_rng(0)
    assert all(p.act(SMALL, state, s, rng) == K.STAY for s in (0, 1))


def test_uniform_random_covers_all_actions():
    p = make_scripted("uniform_random")
    rng = np.random.default_rng(42)
    state = K.reset(SMALL)
    draws = np.array([p.act(SMALL, state, 0, rng) for _ in range(6000)])
    freqs = np.bincount(draws, minlength=K.N_ACTIONS) / 6000
    assert np.all(np.abs(freqs - 1 / 6) < 0.03)


@pytest.mark.parametrize("seats", [(0, 1), (1, 0)])
def test_specialist_pair_completes_deliveries(seats):
    roles = [make_scripted("onion_specialist"), make_scripted("dish_specialist")]
    a, b = roles[seats[0]], roles[seats[1]]
    _, team, events = run_pair(SMALL, a, b, SMALL.horizon)
    deliveries = count(events, "delivery")
    assert deliveries >= 3
    assert team == 20.0 * deliveries


def test_onion_specialist_fills_pots_but_cannot_serve():
    # cramped_room leaves the pot approach open when the partner parks at
    # its spawn (on cramped_small it would wall off the pot)
    room = K.load_layout("cramped_room")
    _, team, events = run_pair(
        room, make_scripted("onion_specialist"), make_scripted("stationary"), room.horizon
    )
    assert count(events, "cooking_started") >= 1
    assert count(events, "delivery") == 0
    assert team == 0.0


def test_dish_specialist_waits_without_a_cook():
    room = K.load_layout("cramped_room")
    _, _, events = run_pair(
        room, make_scripted("dish_specialist"), make_scripted("stationary"), room.horizon
    )
    assert count(events, "onion_placed") == 0
    assert count(events, "delivery") == 0


def test_ring_cycle_clockwise_order():
    assert ring_cycle(RING) == [
        (1, 1),
        (1, 2),
        (1, 3),
        (2, 3),
        (3, 3),
        (3, 2),
        (3, 1),
        (2, 1),
    ]


def test_ring_cycle_rejects_open_floor():
    with pytest.raises(ValueError, match="not a ring"):
        ring_cycle(SMALL)


@pytest.mark.parametrize(
    "name,min_cells",
    # the parked partner at (2, 1) blocks clockwise travel after five moves
    # and counterclockwise travel after one
    [("clockwise", 6), ("counterclockwise", 2)],
)
def test_ring_walker_follows_cycle(name, min_cells):
    cycle = ring_cycle(RING)
    order = cycle if name == "clockwise" else cycle[::-1]
    walker = make_scripted(name)
    rng = np.random.default_rng(0)
    state = K.reset(RING)
    visited = [state.positions[0]]
    for _ in range(10):
        acts = (walker.act(RING, state, 0, rng), K.STAY)
        state, _, _, _ = K.step(RING, state, acts)
        if state.positions[0] != visited[-1]:
            visited.append(state.positions[0])
    assert len(visited) >= min_cells
    for cur, nxt in zip(visited, visited[1:]):
        assert order[(order.index(cur) + 1) % len(order)] == nxt


def test_jsd_identities():
    p = np.array([0.2, 0.5, 0.3])
    assert jsd(p, p) == 0.0
    one_hot = np.eye(2)
    assert math.isclose(jsd(one_hot[0], one_hot[1]), math.log(2), rel_tol=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(50):
        k = int(rng.integers(2, 5))
        dists = rng.dirichlet(np.ones(4), size=k)
        v = jsd(*dists)
        assert -1e-12 <= v <= math.log(k) + 1e-12


def test_jsd_rows_matches_pairwise():
    rng = np.random.default_rng(8)
    p = rng.dirichlet(np.ones(6), size=20)
    q = rng.dirichlet(np.ones(6), size=20)
    rows = jsd_rows(p, q)
    assert rows.shape == (20,)
    for i in range(20):
        assert math.isclose(rows[i], jsd(p[i], q[i]), rel_tol=1e-10, abs_tol=1e-12)


def test_flat_policy_uniform_start_and_roundtrip(tmp_path):
    d = K.obs_dim(SMALL)
    flat = FlatPolicy(d, hidden=(8,), seed=4)
    obs = np.random.default_rng(0).normal(size=(5, d))
    np.testing.assert_allclose(flat.action_probs(obs), 1 / 6, atol=1e-12)

    path = tmp_path / "flat.ckpt"
    flat.save(path, step=7, extra={"stage": "final"})
    loaded, manifest = FlatPolicy.load(path)
    np.testing.assert_array_equal(flat.action_probs(obs), loaded.action_probs(obs))
    np.testing.assert_array_equal(flat.values(obs), loaded.values(obs))
    assert manifest["step"] == 7
    assert manifest["extra"]["kind"] == "flat"

    partner = load_partner(path)
    assert partner.stage == "final"
    act = partner.act(SMALL, K.reset(SMALL), 1, np.random.default_rng(1))
    assert act in range(K.N_ACTIONS)


def test_collect_selfplay_shapes():
    d = K.obs_dim(SMALL)
    flat = FlatPolicy(d, hidden=(8,), seed=1)
    obs, actions, logps, rewards = collect_selfplay(
        SMALL, flat, np.random.default_rng(3), K.RewardConfig(), horizon=25
    )
    assert obs.shape == (2, 26, d)
    assert actions.shape == logps.shape == rewards.shape == (2, 25)
    assert np.all(logps <= 0.0)


def test_population_trainer_smoke(tmp_path):
    cfg = PopulationConfig(
        layout="cramped_small",
        seed=2,
        pop_size=2,
        steps_per_agent=160,
        n_envs=2,
        horizon=40,
        hidden=(8,),
        batch_size=64,
        n_epochs=2,
    )
    run_dir = tmp_path / "pop"
    manifest = PopulationTrainer(cfg, run_dir).train()

    assert (run_dir / "population.json").exists()
    assert len(manifest["agents"]) == 2
    # with 2 updates the 10% and 50% stages land on the same update; the
    # later stage name wins, so each agent records mid + final
    for agent in manifest["agents"]:
        assert set(agent["checkpoints"]) == {"mid", "final"}
        for fname in agent["checkpoints"].values():
            assert (run_dir / fname).exists()

    lines = (run_dir / "population_metrics.jsonl").read_text().splitlines()
    rows = [json.loads(line) for line in lines]
    assert len(rows) == 4  # 2 agents x 2 updates
    # the second agent trains against the first, so its diversity bonus is live
    assert all(row["jsd_bonus"] == 0.0 for row in rows if row["agent"] == 0)
    assert all(row["jsd_bonus"] > 0.0 for row in rows if row["agent"] == 1)

    partners = population_partners(run_dir)
    assert len(partners) == 4
    finals = population_partners(run_dir, stages=("final",))
    assert [p.stage for p in finals] == ["final", "final"]
