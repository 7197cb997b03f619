"""Analytic MDP instances, the worked discriminator example and random generators."""

from __future__ import annotations

import numpy as np

from .discriminator import FeatureMap
from .landscape import LabeledStepData
from .mdp import Policy, TabularMdp


def geometric_distribution(n, ratio=0.5) -> np.ndarray:
    """p_k proportional to ratio**k, k = 0..n-1."""
    p = ratio ** np.arange(n, dtype=float)
    return p / p.sum()


def _initial(initial, n) -> np.ndarray:
    if initial is None or (isinstance(initial, str) and initial == "uniform"):
        return np.full(n, 1.0 / n)
    if isinstance(initial, str) and initial == "geometric":
        return geometric_distribution(n)
    rho = np.asarray(initial, dtype=float)
    if rho.shape != (n,):
        raise ValueError(f"initial distribution must have {n} entries")
    return rho


def standard_imitation(num_states, num_actions=2, horizon=5, initial="uniform"):
    """Absorbing states; only action 0 is rewarded.

    Returns ``(mdp, expert, behavior)`` with the expert always playing action
    0 and the behavior policy always playing action 1.  ``initial`` is
    ``"uniform"`` (the classical instance), ``"geometric"`` or an explicit
    probability vector.
    """
    if num_states < 1 or horizon < 1:
        raise ValueError("num_states and horizon must be positive")
    if num_actions < 2:
        raise ValueError("standard imitation needs at least two actions")
    S, A, H = num_states, num_actions, horizon
    P = np.zeros((H, S, A, S))
    P[:, np.arange(S), :, np.arange(S)] = 1.0
    r = np.zeros((H, S, A))
    r[:, :, 0] = 1.0
    mdp = TabularMdp(P, r, _initial(initial, S))
    expert = Policy.deterministic(np.zeros((H, S), dtype=int), A)
    behavior = Policy.deterministic(np.ones((H, S), dtype=int), A)
    return mdp, expert, behavior


def shared_expert_instance(base: TabularMdp, expert: Policy):
    """Same MDP with the behavior policy set to an exact copy of the expert."""
    return base, expert, Policy(expert.probs.copy())


def disjoint_support_instance(num_states_per_branch, num_actions=2, horizon=5, entry="uniform"):
    """Shared start state that branches into disjoint expert and behavior regions.

    State 0 is the start.  At the first step, action 0 leads into the expert
    region (states ``1 .. K``) and every other action into the behavior region
    (states ``K+1 .. 2K``); ``entry`` sets the landing distribution inside a
    region.  Region states are absorbing.  Reward 1 is paid for action 0 in
    expert-region states from the second step on; the first step pays
    nothing.  The expert plays action 0, the behavior policy action 1.
    """
    if horizon < 2:
        raise ValueError("disjoint support instance needs horizon >= 2")
    if num_states_per_branch < 1 or num_actions < 2:
        raise ValueError("need at least one state per branch and two actions")
    K, A, H = num_states_per_branch, num_actions, horizon
    S = 2 * K + 1
    q = _initial(entry, K)
    expert_states = np.arange(1, K + 1)
    behavior_states = np.arange(K + 1, 2 * K + 1)
    P = np.zeros((H, S, A, S))
    P[:, np.arange(S), :, np.arange(S)] = 1.0
    P[0, 0, :, :] = 0.0
    P[0, 0, 0, expert_states] = q
    P[0, 0, 1:, K + 1:] = q
    r = np.zeros((H, S, A))
    r[1:, expert_states, 0] = 1.0
    rho = np.zeros(S)
    rho[0] = 1.0
    mdp = TabularMdp(P, r, rho)
    expert = Policy.deterministic(np.zeros((H, S), dtype=int), A)
    behavior = Policy.deterministic(np.ones((H, S), dtype=int), A)
    return mdp, expert, behavior


def disjoint_support_regions(num_states_per_branch):
    """Index arrays (expert_region, behavior_region) of :func:`disjoint_support_instance`."""
    K = num_states_per_branch
    return np.arange(1, K + 1), np.arange(K + 1, 2 * K + 1)


EXAMPLE1_FEATURES = ((0.0, 1.0), (-0.5, 0.0), (0.0, -0.5), (-1.0, 0.0))


def example1_instance():
    """The four-sample, two-dimensional discriminator example.

    Sample ``i`` (0-based) is the pair ``(i, i)`` in a 4-state, 4-action
    table.  Expert data are samples 0 and 3, the supplementary data samples 1
    (expert-collected) and 2 (sub-optimal).  Returns
    ``(labeled, expert_samples, union_samples, features)`` where ``features``
    is a one-step :class:`FeatureMap`.
    """
    phi = np.zeros((4, 4, 2))
    for i, v in enumerate(EXAMPLE1_FEATURES):
        phi[i, i] = v
    expert = np.array([(0, 0), (3, 3)])
    supplementary = np.array([(1, 1), (2, 2)])
    union = np.vstack([expert, supplementary])
    labeled = LabeledStepData(good=np.array([(0, 0), (1, 1), (3, 3)]), bad=np.array([(2, 2)]), phi=phi)
    return labeled, expert, union, FeatureMap(phi[None])


def random_mdp(rng, num_states, num_actions, horizon, reward_density=1.0) -> TabularMdp:
    P = rng.dirichlet(np.ones(num_states), size=(horizon, num_states, num_actions))
    r = rng.random((horizon, num_states, num_actions))
    if reward_density < 1.0:
        r *= rng.random(r.shape) < reward_density
    rho = rng.dirichlet(np.ones(num_states))
    return TabularMdp(P, r, rho)


def random_policy(rng, horizon, num_states, num_actions, deterministic=False) -> Policy:
    if deterministic:
        return Policy.deterministic(rng.integers(num_actions, size=(horizon, num_states)), num_actions)
    return Policy(rng.dirichlet(np.ones(num_actions), size=(horizon, num_states)))


def random_separable_instance(rng, dim=2, max_per_group=4):
    """Random linearly separable step data with full-rank expert features.

    Each sample is its own pair ``(i, 0)``.  Returns
    ``(labeled, expert_samples, supplementary_samples, union_samples)``.
    Good samples score positively along a hidden unit direction, bad ones
    negatively.
    """
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)

    def draw(n, sign):
        pts = []
        while len(pts) < n:
            x = rng.uniform(-2.0, 2.0, size=dim)
            score = x @ direction
            if sign * score > 0.05:
                pts.append(x)
        return pts

    while True:
        n_e = int(rng.integers(dim, max_per_group + 1))
        n_s1 = int(rng.integers(0, max_per_group + 1))
        n_s2 = int(rng.integers(1, max_per_group + 1))
        expert_pts = draw(n_e, +1)
        if np.linalg.matrix_rank(np.array(expert_pts)) == dim:
            break
    s1_pts, s2_pts = draw(n_s1, +1), draw(n_s2, -1)
    feats = np.array(expert_pts + s1_pts + s2_pts)
    phi = feats[:, None, :]
    idx = np.arange(len(feats))
    e = np.stack([idx[:n_e], np.zeros(n_e, int)], axis=1)
    s1 = np.stack([idx[n_e:n_e + n_s1], np.zeros(n_s1, int)], axis=1)
    s2 = np.stack([idx[n_e + n_s1:], np.zeros(n_s2, int)], axis=1)
    supplementary = np.vstack([s1, s2])
    labeled = LabeledStepData(good=np.vstack([e, s1]), bad=s2, phi=phi)
    return labeled, e, supplementary, np.vstack([e, supplementary])


def random_d1_instance(rng, max_per_group=5):
    """Random one-dimensional separable step data.

    Supplementary good samples are drawn with a wider score range than the
    expert ones, so both outcomes of the mean-score condition occur.
    Returns ``(labeled, expert_samples, supplementary_samples, union_samples)``.
    """
    sign = 1.0 if rng.random() < 0.5 else -1.0
    n_e = int(rng.integers(1, max_per_group + 1))
    n_s1 = int(rng.integers(0, max_per_group + 1))
    n_s2 = int(rng.integers(1, max_per_group + 1))
    e_vals = sign * rng.uniform(0.1, 2.0, n_e)
    s1_vals = sign * rng.uniform(0.1, 4.0, n_s1)
    s2_vals = -sign * rng.uniform(0.1, 2.0, n_s2)
    vals = np.concatenate([e_vals, s1_vals, s2_vals])
    phi = vals[:, None, None]
    idx = np.arange(len(vals))
    zeros = np.zeros(len(vals), int)
    pairs = np.stack([idx, zeros], axis=1)
    e, s1, s2 = pairs[:n_e], pairs[n_e:n_e + n_s1], pairs[n_e + n_s1:]
    supplementary = np.vstack([s1, s2])
    labeled = LabeledStepData(good=np.vstack([e, s1]), bad=s2, phi=phi)
    return labeled, e, supplementary, np.vstack([e, supplementary])
