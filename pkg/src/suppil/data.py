"""Trajectory sampling and the expert / supplementary / union datasets.

Randomness comes from :func:`make_stream`, a Philox (counter-based) generator
keyed by a 64-bit seed plus integer substream keys, so trial ``k`` of an
experiment always sees the same draws however trials are scheduled.

A trajectory of horizon H consumes exactly ``2 * H`` uniforms: one for each
state (initial state, then every transition target) and one for each action.
Dataset collection draws one extra uniform per trajectory for the
expert-or-behavior coin, all coins before any roll-out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import Policy, ShapeError, TabularMdp

EXPERT = "expert"
BEHAVIOR = "behavior"


def make_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent substream for ``(seed, *keys)``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def _cdf(probs: np.ndarray) -> np.ndarray:
    # Dividing by the running total pins the last entry to exactly 1.0, so a
    # uniform in [0, 1) never selects a trailing zero-probability index.
    c = np.cumsum(probs, axis=-1)
    return c / c[..., -1:]


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    # cdf: (n, K) rows; u: (n,).  Returns indices in [0, K).
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


def rollout(mdp: TabularMdp, policies: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Roll out ``n`` trajectories from pre-drawn uniforms.

    ``policies`` holds one (H, S, A) probability table per trajectory, shape
    (n, H, S, A), or a single table shared by all.  ``uniforms`` has shape
    (n, 2H) with columns ordered s_0, a_0, s_1, a_1, ...  Returns integer
    steps of shape (n, H, 2) holding (state, action).
    """
    H, S, A = mdp.shape
    uniforms = np.atleast_2d(uniforms)
    n = uniforms.shape[0]
    pi_cdf = _cdf(policies)
    shared = pi_cdf.ndim == 3
    p_cdf = _cdf(mdp.transitions)
    rows = np.arange(n)
    out = np.empty((n, H, 2), dtype=np.int64)
    s = _inverse_cdf(np.broadcast_to(_cdf(mdp.initial_dist), (n, S)), uniforms[:, 0])
    for h in range(H):
        cdf = pi_cdf[h, s] if shared else pi_cdf[rows, h, s]
        a = _inverse_cdf(cdf, uniforms[:, 2 * h + 1])
        out[:, h, 0] = s
        out[:, h, 1] = a
        if h + 1 < H:
            s = _inverse_cdf(p_cdf[h, s, a], uniforms[:, 2 * h + 2])
    return out


def sample_trajectory(mdp: TabularMdp, policy: Policy, rng: np.random.Generator) -> np.ndarray:
    """One trajectory as an (H, 2) array of (state, action) pairs."""
    if policy.shape != mdp.shape:
        raise ShapeError(f"policy shape {policy.shape} does not match MDP shape {mdp.shape}")
    u = rng.random((1, 2 * mdp.horizon))
    return rollout(mdp, policy.probs, u)[0]


def count_steps(steps: np.ndarray, shape) -> np.ndarray:
    """n_h(s, a) counts from an (n, H, 2) step array."""
    H, S, A = shape
    counts = np.zeros((H, S, A), dtype=np.int64)
    if len(steps):
        h_idx = np.broadcast_to(np.arange(H), steps.shape[:2])
        np.add.at(counts, (h_idx, steps[..., 0], steps[..., 1]), 1)
    return counts


@dataclass(frozen=True)
class TrajectoryDataset:
    """Trajectories plus their per-step counts.

    ``steps`` has shape (N, H, 2); ``tags`` gives the source of each row.
    """

    shape: tuple
    steps: np.ndarray
    tags: tuple = ()
    counts: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        H, S, A = self.shape
        steps = np.asarray(self.steps, dtype=np.int64).reshape(-1, H, 2)
        if len(steps) and (steps[..., 0].max() >= S or steps[..., 1].max() >= A or steps.min() < 0):
            raise ShapeError("trajectory indices out of range")
        tags = tuple(self.tags) if self.tags else (EXPERT,) * len(steps)
        if len(tags) != len(steps):
            raise ValueError(f"{len(tags)} tags for {len(steps)} trajectories")
        steps.setflags(write=False)
        counts = count_steps(steps, self.shape)
        counts.setflags(write=False)
        object.__setattr__(self, "shape", tuple(int(x) for x in self.shape))
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return len(self.steps)

    @classmethod
    def empty(cls, shape) -> "TrajectoryDataset":
        return cls(shape, np.zeros((0, shape[0], 2), dtype=np.int64))

    def empirical(self) -> np.ndarray:
        """d_h(s, a) = n_h(s, a) / N; all zeros for an empty dataset."""
        if len(self) == 0:
            return np.zeros(self.counts.shape)
        return self.counts / len(self)

    def step_samples(self, h: int) -> np.ndarray:
        """The (state, action) pairs at step ``h``, shape (N, 2)."""
        return self.steps[:, h, :]

    def to_text(self) -> str:
        """One trajectory per line: ``tag h:s,a;h:s,a;...``."""
        lines = []
        for tag, traj in zip(self.tags, self.steps):
            body = ";".join(f"{h}:{s},{a}" for h, (s, a) in enumerate(traj))
            lines.append(f"{tag} {body}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, shape) -> "TrajectoryDataset":
        steps, tags = [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                tag, body = line.split(None, 1)
                traj = []
                for expected_h, item in enumerate(body.split(";")):
                    h, sa = item.split(":")
                    if int(h) != expected_h:
                        raise ValueError(f"step {h} out of order")
                    s, a = sa.split(",")
                    traj.append((int(s), int(a)))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: malformed trajectory ({exc})") from None
            if len(traj) != shape[0]:
                raise ValueError(f"line {lineno}: trajectory length {len(traj)} != horizon {shape[0]}")
            tags.append(tag)
            steps.append(traj)
        if not steps:
            return cls.empty(shape)
        return cls(shape, np.array(steps), tuple(tags))


def collect_datasets(mdp: TabularMdp, expert: Policy, behavior: Policy, eta: float, n_tot: int,
                     rng: np.random.Generator) -> tuple[TrajectoryDataset, TrajectoryDataset]:
    """Roll out ``n_tot`` trajectories, each from the expert with probability eta.

    Returns ``(D_expert, D_supplementary)``; the expert count is
    Binomial(n_tot, eta).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if n_tot < 1:
        raise ValueError("n_tot must be a positive integer")
    for pol in (expert, behavior):
        if pol.shape != mdp.shape:
            raise ShapeError(f"policy shape {pol.shape} does not match MDP shape {mdp.shape}")
    coins = rng.random(n_tot) < eta
    uniforms = rng.random((n_tot, 2 * mdp.horizon))
    per_traj = np.where(coins[:, None, None, None], expert.probs, behavior.probs)
    steps = rollout(mdp, per_traj, uniforms)
    d_e = TrajectoryDataset(mdp.shape, steps[coins], (EXPERT,) * int(coins.sum()))
    d_s = TrajectoryDataset(mdp.shape, steps[~coins], (BEHAVIOR,) * int((~coins).sum()))
    return d_e, d_s


def union_counts(d_e: TrajectoryDataset, d_s: TrajectoryDataset) -> TrajectoryDataset:
    """D^U = D^E followed by D^S; counts add."""
    if d_e.shape != d_s.shape:
        raise ShapeError(f"dataset shapes differ: {d_e.shape} vs {d_s.shape}")
    steps = np.concatenate([d_e.steps, d_s.steps], axis=0)
    return TrajectoryDataset(d_e.shape, steps, d_e.tags + d_s.tags)
