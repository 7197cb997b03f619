"""Finite episodic MDPs, time-dependent policies and exact evaluation.

All tensors are dense float64 arrays.  Steps are 0-based: ``h = 0`` is the
first decision step and ``h = H - 1`` the last.

Shapes
------
transitions : (H, S, A, S)   P_h(s' | s, a)
rewards     : (H, S, A)      r_h(s, a) in [0, 1]
initial     : (S,)           rho(s)
policy      : (H, S, A)      pi_h(a | s)
occupancy   : (H, S, A)      d^pi_h(s, a)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STOCHASTIC_ATOL = 1e-12


class ShapeError(ValueError):
    """Raised when an MDP, policy or table has incompatible dimensions."""


@dataclass(frozen=True)
class TabularMdp:
    transitions: np.ndarray
    rewards: np.ndarray
    initial_dist: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        rho = np.asarray(self.initial_dist, dtype=float)
        if P.ndim != 4 or P.shape[1] != P.shape[3]:
            raise ShapeError(f"transitions must have shape (H, S, A, S), got {P.shape}")
        if r.shape != P.shape[:3]:
            raise ShapeError(f"rewards shape {r.shape} does not match transitions {P.shape[:3]}")
        if rho.shape != (P.shape[1],):
            raise ShapeError(f"initial_dist shape {rho.shape} does not match {P.shape[1]} states")
        for name, arr in (("transitions", P), ("rewards", r), ("initial_dist", rho)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        """(H, S, A)."""
        return self.rewards.shape


@dataclass(frozen=True)
class Policy:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3:
            raise ShapeError(f"policy probs must have shape (H, S, A), got {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.probs.shape

    @classmethod
    def uniform(cls, horizon, num_states, num_actions) -> "Policy":
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions, num_actions) -> "Policy":
        """Build a policy from an integer table of chosen actions, shape (H, S)."""
        actions = np.asarray(actions, dtype=int)
        return cls(np.eye(num_actions)[actions])

    def is_stochastic(self, atol=STOCHASTIC_ATOL) -> bool:
        return bool(np.all(self.probs >= 0) and np.allclose(self.probs.sum(-1), 1.0, atol=atol, rtol=0))


@dataclass(frozen=True)
class OccupancyMeasure:
    dist: np.ndarray

    def state_marginal(self) -> np.ndarray:
        """d_h(s) = sum_a d_h(s, a), shape (H, S)."""
        return self.dist.sum(-1)


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    value: float

    def __str__(self):
        return f"{self.kind} at {self.index}: {self.value:.6g}"


def validate_mdp(mdp: TabularMdp, atol=STOCHASTIC_ATOL) -> list[Violation]:
    """Check the stochasticity and reward-range invariants.

    Returns an empty list when the MDP is well formed.  A transition row is
    reported once (as ``row-sum`` or ``negative-prob``), never per entry.
    """
    report = []
    P, r, rho = mdp.transitions, mdp.rewards, mdp.initial_dist
    sums = P.sum(-1)
    for idx in zip(*np.nonzero(np.abs(sums - 1.0) > atol)):
        report.append(Violation("row-sum", tuple(int(i) for i in idx), float(sums[idx])))
    negative_rows = (P < 0).any(-1)
    for idx in zip(*np.nonzero(negative_rows)):
        report.append(Violation("negative-prob", tuple(int(i) for i in idx), float(P[idx].min())))
    if abs(rho.sum() - 1.0) > atol:
        report.append(Violation("initial-sum", (), float(rho.sum())))
    for idx in np.nonzero(rho < 0)[0]:
        report.append(Violation("initial-negative", (int(idx),), float(rho[idx])))
    for idx in zip(*np.nonzero((r < 0) | (r > 1))):
        report.append(Violation("reward-range", tuple(int(i) for i in idx), float(r[idx])))
    return report


def _check_shapes(mdp: TabularMdp, policy: Policy):
    if policy.shape != mdp.shape:
        raise ShapeError(f"policy shape {policy.shape} does not match MDP shape {mdp.shape}")


def occupancy(mdp: TabularMdp, policy: Policy) -> OccupancyMeasure:
    """Forward dynamic programming for the state-action distribution."""
    _check_shapes(mdp, policy)
    H, S, A = mdp.shape
    pi = policy.probs
    d = np.empty((H, S, A))
    d[0] = mdp.initial_dist[:, None] * pi[0]
    for h in range(H - 1):
        next_states = np.einsum("sa,sat->t", d[h], mdp.transitions[h])
        d[h + 1] = next_states[:, None] * pi[h + 1]
    return OccupancyMeasure(d)


def policy_value(mdp: TabularMdp, policy: Policy) -> float:
    """V(pi) through the occupancy (dual) form."""
    d = occupancy(mdp, policy).dist
    return float(np.sum(d * mdp.rewards))


def action_values(mdp: TabularMdp, policy: Policy) -> np.ndarray:
    """Backward induction for Q_h(s, a), with Q beyond the horizon equal to zero."""
    _check_shapes(mdp, policy)
    H, S, A = mdp.shape
    Q = np.empty((H, S, A))
    Q[H - 1] = mdp.rewards[H - 1]
    for h in range(H - 2, -1, -1):
        v_next = np.sum(policy.probs[h + 1] * Q[h + 1], axis=-1)
        Q[h] = mdp.rewards[h] + mdp.transitions[h] @ v_next
    return Q


def policy_value_backward(mdp: TabularMdp, policy: Policy) -> float:
    """V(pi) through backward induction; independent of :func:`occupancy`."""
    Q = action_values(mdp, policy)
    v1 = np.sum(policy.probs[0] * Q[0], axis=-1)
    return float(mdp.initial_dist @ v1)


def mixture_policy(mdp: TabularMdp, expert: Policy, behavior: Policy, eta: float) -> Policy:
    """Policy induced by eta * d^expert + (1 - eta) * d^behavior.

    States where the mixed state marginal is zero get the uniform action
    distribution.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    d_mix = eta * occupancy(mdp, expert).dist + (1.0 - eta) * occupancy(mdp, behavior).dist
    return Policy(normalize_rows(d_mix))


def normalize_rows(table: np.ndarray) -> np.ndarray:
    """Row-normalize the last axis; all-zero rows become uniform."""
    table = np.asarray(table, dtype=float)
    totals = table.sum(-1, keepdims=True)
    num_actions = table.shape[-1]
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, table / safe, 1.0 / num_actions)
