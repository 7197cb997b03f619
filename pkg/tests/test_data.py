import numpy as np
import pytest

from suppil.data import (BEHAVIOR, EXPERT, TrajectoryDataset, collect_datasets, make_stream,
                         rollout, sample_trajectory, union_counts)
from suppil.instances import random_mdp, random_policy, standard_imitation
from suppil.mdp import Policy, TabularMdp, mixture_policy, occupancy


def test_deterministic_mdp_gives_unique_trajectory():
    # 3-cycle: s -> s + a (mod 3), start at 0, always action 1
    H, S, A = 4, 3, 2
    P = np.zeros((H, S, A, S))
    for s in range(S):
        for a in range(A):
            P[:, s, a, (s + a) % S] = 1.0
    rho = np.array([1.0, 0.0, 0.0])
    mdp = TabularMdp(P, np.zeros((H, S, A)), rho)
    pi = Policy.deterministic(np.ones((H, S), int), A)
    for seed in range(5):
        traj = sample_trajectory(mdp, pi, make_stream(seed))
        assert traj.tolist() == [[0, 1], [1, 1], [2, 1], [0, 1]]


def test_expert_actions_always_first():
    mdp, expert, _ = standard_imitation(6)
    traj = rollout(mdp, expert.probs, make_stream(0).random((50, 10)))
    assert np.all(traj[..., 1] == 0)


def test_initial_state_frequencies():
    mdp, expert, _ = standard_imitation(2, horizon=1)
    n = 10 ** 5
    traj = rollout(mdp, expert.probs, make_stream(1).random((n, 2)))
    freq = np.mean(traj[:, 0, 0] == 0)
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / n)


def test_fixed_draw_count():
    mdp = random_mdp(make_stream(2), 4, 3, 5)
    pi = random_policy(make_stream(3), 5, 4, 3)
    g1, g2 = make_stream(9), make_stream(9)
    sample_trajectory(mdp, pi, g1)
    g2.random(10)
    assert g1.random() == g2.random()


def test_zero_probability_action_never_drawn():
    mdp = random_mdp(make_stream(4), 3, 3, 3)
    probs = np.zeros((3, 3, 3))
    probs[..., 0] = 0.3
    probs[..., 1] = 0.7
    traj = rollout(mdp, probs, make_stream(5).random((20000, 6)))
    assert not np.any(traj[..., 1] == 2)


def test_collect_degenerate_eta():
    mdp, e, b = standard_imitation(4)
    d_e, d_s = collect_datasets(mdp, e, b, 1.0, 30, make_stream(0))
    assert len(d_e) == 30 and len(d_s) == 0
    d_e, d_s = collect_datasets(mdp, e, b, 0.0, 30, make_stream(0))
    assert len(d_e) == 0 and len(d_s) == 30
    assert set(d_s.tags) == {BEHAVIOR}


def test_collect_rejects_bad_arguments():
    mdp, e, b = standard_imitation(4)
    with pytest.raises(ValueError):
        collect_datasets(mdp, e, b, 0.5, 0, make_stream(0))
    with pytest.raises(ValueError):
        collect_datasets(mdp, e, b, -0.1, 5, make_stream(0))


def test_expert_count_is_binomial():
    mdp, e, b = standard_imitation(2, horizon=1)
    counts = [len(collect_datasets(mdp, e, b, 0.3, 10 ** 4, make_stream(7, k))[0])
              for k in range(100)]
    se = np.sqrt(10 ** 4 * 0.3 * 0.7 / 100)
    assert abs(np.mean(counts) - 3000) <= 3 * se


def test_counts_invariants():
    mdp = random_mdp(make_stream(1), 5, 3, 4)
    e, b = random_policy(make_stream(2), 4, 5, 3), random_policy(make_stream(3), 4, 5, 3)
    d_e, d_s = collect_datasets(mdp, e, b, 0.4, 57, make_stream(4))
    d_u = union_counts(d_e, d_s)
    for d in (d_e, d_s, d_u):
        assert np.all(d.counts.sum(axis=(1, 2)) == len(d))
    assert np.array_equal(d_u.counts, d_e.counts + d_s.counts)
    assert d_u.tags[:len(d_e)] == (EXPERT,) * len(d_e)


def test_union_with_empty_supplementary():
    mdp, e, b = standard_imitation(4)
    d_e, _ = collect_datasets(mdp, e, b, 1.0, 12, make_stream(2))
    d_u = union_counts(d_e, TrajectoryDataset.empty(mdp.shape))
    assert np.array_equal(d_u.counts, d_e.counts)


def test_union_of_disjoint_single_trajectories():
    shape = (3, 4, 2)
    a = TrajectoryDataset(shape, [[(0, 0), (1, 0), (2, 0)]])
    b = TrajectoryDataset(shape, [[(3, 1), (2, 1), (1, 1)]], (BEHAVIOR,))
    u = union_counts(a, b)
    assert set(np.unique(u.counts)) <= {0, 1}
    assert np.all(u.counts.sum(axis=(1, 2)) == 2)


def test_union_shape_mismatch():
    with pytest.raises(ValueError):
        union_counts(TrajectoryDataset.empty((2, 3, 2)), TrajectoryDataset.empty((2, 3, 3)))


def test_same_seed_same_data():
    mdp, e, b = standard_imitation(5)
    x = collect_datasets(mdp, e, b, 0.5, 40, make_stream(11, 3))
    y = collect_datasets(mdp, e, b, 0.5, 40, make_stream(11, 3))
    assert np.array_equal(x[0].steps, y[0].steps) and np.array_equal(x[1].steps, y[1].steps)


def test_empirical_converges_to_mixture_occupancy():
    g = make_stream(21)
    mdp = random_mdp(g, 4, 2, 3)
    e, b = random_policy(g, 3, 4, 2), random_policy(g, 3, 4, 2)
    eta = 0.35
    d_e, d_s = collect_datasets(mdp, e, b, eta, 10 ** 5, g)
    emp = union_counts(d_e, d_s).empirical()
    target = eta * occupancy(mdp, e).dist + (1 - eta) * occupancy(mdp, b).dist
    assert np.max(np.abs(emp - target)) < 0.01
    mix = occupancy(mdp, mixture_policy(mdp, e, b, eta)).dist
    assert np.allclose(mix, target, atol=1e-10)


def test_text_round_trip():
    mdp, e, b = standard_imitation(5, horizon=3)
    d_e, d_s = collect_datasets(mdp, e, b, 0.5, 8, make_stream(1))
    d_u = union_counts(d_e, d_s)
    text = d_u.to_text()
    first = text.splitlines()[0]
    assert first.split()[0] in (EXPERT, BEHAVIOR) and first.count(";") == 2
    back = TrajectoryDataset.from_text(text, mdp.shape)
    assert np.array_equal(back.steps, d_u.steps) and back.tags == d_u.tags


def test_from_text_rejects_wrong_length():
    with pytest.raises(ValueError, match="horizon"):
        TrajectoryDataset.from_text("expert 0:1,0;1:1,0\n", (3, 2, 2))


def test_out_of_range_indices_rejected():
    with pytest.raises(ValueError):
        TrajectoryDataset((1, 2, 2), [[(2, 0)]])
