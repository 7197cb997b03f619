"""Closed-form tabular policy learners: BC, NBCU and weighted BC (WBCU).

Each learner returns the exact per-state maximizer of its (weighted)
log-likelihood.  States with no usable mass fall back to the uniform
action distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TrajectoryDataset
from .mdp import Policy, ShapeError, normalize_rows


@dataclass(frozen=True)
class WeightTable:
    weights: np.ndarray
    threshold: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _check_actions(dataset: TrajectoryDataset, num_actions):
    if dataset.shape[2] != num_actions:
        raise ShapeError(f"dataset has {dataset.shape[2]} actions, expected {num_actions}")


def bc_policy(d_e: TrajectoryDataset, num_actions: int) -> Policy:
    """pi_h(a|s) = n_h(s, a) / n_h(s), uniform where n_h(s) = 0."""
    _check_actions(d_e, num_actions)
    return Policy(normalize_rows(d_e.counts))


def nbcu_policy(d_u: TrajectoryDataset, num_actions: int) -> Policy:
    """BC on the union dataset."""
    return bc_policy(d_u, num_actions)


def weighted_bc_policy(d_u: TrajectoryDataset, w: WeightTable, num_actions: int) -> Policy:
    """Maximizer of sum n_h(s,a) w_h(s,a) 1[w_h(s,a) >= delta] log pi_h(a|s)."""
    _check_actions(d_u, num_actions)
    if w.weights.shape != d_u.counts.shape:
        raise ShapeError(f"weight shape {w.weights.shape} does not match counts {d_u.counts.shape}")
    mass = d_u.counts * w.weights * (w.weights >= w.threshold)
    return Policy(normalize_rows(mass))


def tabular_weights(d_e: TrajectoryDataset, d_u: TrajectoryDataset) -> np.ndarray:
    """Importance weights w = c*/(1 - c*) = d_E / d_U of the tabular discriminator.

    Pairs never seen in the expert data get weight 0; pairs absent from the
    union (which then cannot be in the expert data either) also get 0.
    """
    de = d_e.empirical()
    du = d_u.empirical()
    with np.errstate(divide="ignore", invalid="ignore"):
        c_star = np.where(de + du > 0, de / (de + du), 0.0)
        w = np.where(de > 0, c_star / (1.0 - c_star), 0.0)
    return w


def wbcu_tabular(d_e: TrajectoryDataset, d_u: TrajectoryDataset, num_actions: int,
                 delta: float = 0.0) -> Policy:
    """WBCU with a table-parameterized discriminator (analytic optimum)."""
    return weighted_bc_policy(d_u, WeightTable(tabular_weights(d_e, d_u), delta), num_actions)


def log_likelihood(policy: Policy, mass: np.ndarray) -> float:
    """sum_{h,s,a} mass_h(s,a) log pi_h(a|s), with 0 log 0 taken as 0."""
    p = policy.probs
    with np.errstate(divide="ignore"):
        terms = np.where(mass > 0, mass * np.log(np.where(mass > 0, p, 1.0)), 0.0)
    return float(terms.sum())


def policy_to_text(policy: Policy) -> str:
    """Plain-text table: one ``h s p_0 p_1 ...`` line per (step, state)."""
    H, S, A = policy.shape
    lines = ["# h s " + " ".join(f"p{a}" for a in range(A))]
    for h in range(H):
        for s in range(S):
            probs = " ".join(repr(float(x)) for x in policy.probs[h, s])
            lines.append(f"{h} {s} {probs}")
    return "\n".join(lines) + "\n"


def policy_from_text(text: str, shape) -> Policy:
    H, S, A = shape
    probs = np.full((H, S, A), np.nan)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2 + A:
            raise ValueError(f"line {lineno}: expected {2 + A} fields, got {len(fields)}")
        h, s = int(fields[0]), int(fields[1])
        probs[h, s] = [float(x) for x in fields[2:]]
    if np.isnan(probs).any():
        raise ValueError("policy table is missing (step, state) rows")
    return Policy(probs)

