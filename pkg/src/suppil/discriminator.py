"""Linear-feature logistic discriminator between expert and union samples.

At each step h the discriminator is ``c_h(s, a) = sigmoid(<phi_h(s, a), theta_h>)``
trained on the loss

    L_h(theta) = mean_{D^E_h} softplus(-<phi, theta>) + mean_{D^U_h} softplus(<phi, theta>)

and turned into importance weights ``w = c / (1 - c) = exp(<phi, theta>)``.
The loss is smooth and convex; :func:`train_discriminator` minimizes it by
damped Newton from ``theta = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .cloning import WeightTable, weighted_bc_policy
from .data import TrajectoryDataset, union_counts
from .mdp import Policy, ShapeError

WEIGHT_CAP = 1e15
THETA_NORM_CAP = 1e3
LOG_WEIGHT_CAP = float(np.log(WEIGHT_CAP))


class DiscriminatorError(RuntimeError):
    pass


class OptimumNotAttained(DiscriminatorError):
    """The loss infimum is approached only as ||theta|| grows without bound."""


class ConvergenceError(DiscriminatorError):
    pass


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(-np.abs(x))))


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_slope(x):
    """sigma(x) (1 - sigma(x)), the second derivative of softplus."""
    s = sigmoid(np.abs(x))
    return s * (1.0 - s)


@dataclass(frozen=True)
class FeatureMap:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 4:
            raise ShapeError(f"features must have shape (H, S, A, d), got {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise ValueError("feature table has non-finite entries")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return self.phi.shape[-1]

    @property
    def shape(self) -> tuple:
        return self.phi.shape[:3]

    def step(self, h: int) -> np.ndarray:
        return self.phi[h]


def one_hot_features(shape) -> FeatureMap:
    """phi_h(s, a) = e_{(s, a)} in R^{S A}: the tabular discriminator."""
    H, S, A = shape
    eye = np.eye(S * A).reshape(S, A, S * A)
    return FeatureMap(np.broadcast_to(eye, (H, S, A, S * A)).copy())


def _as_pairs(samples) -> np.ndarray:
    pairs = np.asarray(samples, dtype=np.int64).reshape(-1, 2)
    return pairs


class StepObjective:
    """L_h for one step, with repeated samples folded into weights."""

    def __init__(self, expert_samples, union_samples, phi_h):
        phi_h = np.asarray(phi_h, dtype=float)
        if phi_h.ndim != 3:
            raise ShapeError(f"step features must have shape (S, A, d), got {phi_h.shape}")
        e = _as_pairs(expert_samples)
        u = _as_pairs(union_samples)
        if len(e) == 0 or len(u) == 0:
            raise ValueError("expert and union sample lists must be nonempty")
        self.dim = phi_h.shape[-1]
        self.n_expert, self.n_union = len(e), len(u)
        self.x_e, self.w_e = self._fold(e, phi_h)
        self.x_u, self.w_u = self._fold(u, phi_h)

    @staticmethod
    def _fold(pairs, phi_h):
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        return phi_h[uniq[:, 0], uniq[:, 1]], counts / len(pairs)

    def _theta(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape != (self.dim,):
            raise ShapeError(f"theta has length {theta.size}, features have dimension {self.dim}")
        return theta

    def loss(self, theta) -> float:
        theta = self._theta(theta)
        return float(self.w_e @ softplus(-(self.x_e @ theta)) + self.w_u @ softplus(self.x_u @ theta))

    def grad(self, theta) -> np.ndarray:
        theta = self._theta(theta)
        ge = -(self.w_e * sigmoid(-(self.x_e @ theta))) @ self.x_e
        gu = (self.w_u * sigmoid(self.x_u @ theta)) @ self.x_u
        return ge + gu

    def hess(self, theta) -> np.ndarray:
        theta = self._theta(theta)
        ce = self.w_e * sigmoid_slope(self.x_e @ theta)
        cu = self.w_u * sigmoid_slope(self.x_u @ theta)
        return (self.x_e.T * ce) @ self.x_e + (self.x_u.T * cu) @ self.x_u

    def feature_rank(self) -> int:
        return int(np.linalg.matrix_rank(np.vstack([self.x_e, self.x_u])))

    def recession_direction(self):
        """A direction along which the loss decreases forever, or None.

        Such a v has <phi, v> >= 0 on every expert sample and <= 0 on every
        union sample, strictly for at least one; it exists exactly when the
        infimum of a full-rank problem is not attained.  Found by a bounded LP.
        """
        scale = max(float(np.max(np.abs(self.x_e))), float(np.max(np.abs(self.x_u))), 1e-300)
        xe, xu = self.x_e / scale, self.x_u / scale
        cost = -(xe.sum(axis=0) - xu.sum(axis=0))
        res = linprog(cost, A_ub=np.vstack([-xe, xu]), b_ub=np.zeros(len(xe) + len(xu)),
                      bounds=[(-1.0, 1.0)] * self.dim, method="highs")
        if res.status != 0 or -res.fun <= 1e-9:
            return None
        return np.asarray(res.x)


def logistic_loss(theta, expert_step_samples, union_step_samples, phi_h) -> float:
    return StepObjective(expert_step_samples, union_step_samples, phi_h).loss(theta)


def logistic_grad(theta, expert_step_samples, union_step_samples, phi_h) -> np.ndarray:
    return StepObjective(expert_step_samples, union_step_samples, phi_h).grad(theta)


def logistic_hessian(theta, expert_step_samples, union_step_samples, phi_h) -> np.ndarray:
    return StepObjective(expert_step_samples, union_step_samples, phi_h).hess(theta)


def stacked_design(expert_step_samples, union_step_samples, phi_h):
    """Per-sample form of the loss: ``L(theta) = G(B theta)``.

    Returns ``(B, weights)`` where row i of B is ``-y_i phi_i`` (y = +1 for
    expert rows, -1 for union rows) and ``G(v) = sum_i weights_i softplus(v_i)``.
    """
    e = _as_pairs(expert_step_samples)
    u = _as_pairs(union_step_samples)
    phi_h = np.asarray(phi_h, dtype=float)
    B = np.vstack([-phi_h[e[:, 0], e[:, 1]], phi_h[u[:, 0], u[:, 1]]])
    weights = np.concatenate([np.full(len(e), 1.0 / len(e)), np.full(len(u), 1.0 / len(u))])
    return B, weights


def _newton_direction(g, H):
    try:
        evals = np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError:
        return -g
    if evals[0] <= 1e-14 * max(evals[-1], 1e-300):
        return -g
    return -np.linalg.solve(H, g)


def minimize_step_loss(objective: StepObjective, tol=1e-10, max_iters=500,
                       theta_cap=THETA_NORM_CAP) -> np.ndarray:
    """Damped Newton with Armijo backtracking (factor 0.5) from theta = 0.

    Raises :class:`OptimumNotAttained` up front for rank-deficient or
    separable data, and during the run if ||theta|| passes ``theta_cap``.
    """
    rank = objective.feature_rank()
    if rank < objective.dim:
        raise OptimumNotAttained(
            f"optimum not attained: sample features have rank {rank} < d = {objective.dim}")
    if objective.recession_direction() is not None:
        raise OptimumNotAttained(
            "optimum not attained: the loss decreases without bound along a direction "
            "that separates union-only samples from the expert samples")
    theta = np.zeros(objective.dim)
    f = objective.loss(theta)
    g = objective.grad(theta)
    for _ in range(max_iters):
        if np.max(np.abs(g)) <= tol:
            return theta
        p = _newton_direction(g, objective.hess(theta))
        slope = float(g @ p)
        if slope >= 0:
            p, slope = -g, -float(g @ g)
        t = 1.0
        accepted = None
        if -slope <= 1e-13 * max(1.0, abs(f)):
            # Predicted decrease is below the rounding resolution of the loss;
            # Armijo cannot discriminate, so go straight to the gradient test.
            attempts = 0
        else:
            attempts = 60
        for _ in range(attempts):
            cand = theta + t * p
            f_cand = objective.loss(cand)
            if f_cand <= f + 1e-4 * t * slope:
                accepted = cand
                break
            t *= 0.5
        if accepted is None:
            # Below rounding resolution of the loss: take the full step if it
            # still shrinks the gradient.
            cand = theta + p
            if np.max(np.abs(objective.grad(cand))) < np.max(np.abs(g)):
                accepted = cand
            else:
                raise ConvergenceError(
                    f"line search stalled with gradient norm {np.max(np.abs(g)):.3e}")
        theta = accepted
        f = objective.loss(theta)
        g = objective.grad(theta)
        if np.linalg.norm(theta) > theta_cap:
            raise OptimumNotAttained(
                f"optimum not attained: ||theta|| exceeded {theta_cap:g} with gradient norm "
                f"{np.max(np.abs(g)):.3e} (separable or rank-deficient data)")
    if np.max(np.abs(g)) <= tol:
        return theta
    raise ConvergenceError(f"no convergence in {max_iters} iterations, gradient norm {np.max(np.abs(g)):.3e}")


def train_discriminator(expert_step_samples, union_step_samples, phi_h, tol=1e-10,
                        max_iters=500) -> np.ndarray:
    """theta*_h minimizing the step loss, to ||grad||_inf <= tol."""
    return minimize_step_loss(StepObjective(expert_step_samples, union_step_samples, phi_h),
                              tol=tol, max_iters=max_iters)


def importance_weight(theta, phi_sa):
    """w = c / (1 - c) with c = sigmoid(<phi, theta>), i.e. exp(<phi, theta>).

    Saturates at ``WEIGHT_CAP``.  Works elementwise over leading axes of
    ``phi_sa``.
    """
    score = np.asarray(phi_sa, dtype=float) @ np.asarray(theta, dtype=float)
    return np.exp(np.minimum(score, LOG_WEIGHT_CAP))


@dataclass(frozen=True)
class DiscriminatorFit:
    thetas: np.ndarray    # (H, d)
    weights: np.ndarray   # (H, S, A)

    def to_text(self) -> str:
        """θ vectors then per-pair weights: ``theta h v...`` and ``weight h s a w``."""
        lines = []
        for h, th in enumerate(self.thetas):
            lines.append(f"theta {h} " + " ".join(repr(float(v)) for v in th))
        H, S, A = self.weights.shape
        for h in range(H):
            for s in range(S):
                for a in range(A):
                    lines.append(f"weight {h} {s} {a} {float(self.weights[h, s, a])!r}")
        return "\n".join(lines) + "\n"


def fit_discriminators(d_e: TrajectoryDataset, d_u: TrajectoryDataset, features: FeatureMap,
                       tol=1e-10, max_iters=500) -> DiscriminatorFit:
    """Train one discriminator per step and tabulate w_h(s, a) for all pairs."""
    if features.shape != d_u.shape:
        raise ShapeError(f"feature table shape {features.shape} does not match data {d_u.shape}")
    H = d_u.shape[0]
    thetas = np.zeros((H, features.dim))
    for h in range(H):
        thetas[h] = train_discriminator(d_e.step_samples(h), d_u.step_samples(h),
                                        features.step(h), tol=tol, max_iters=max_iters)
    weights = np.stack([importance_weight(thetas[h], features.step(h)) for h in range(H)])
    return DiscriminatorFit(thetas, weights)


def wbcu_featured(d_e: TrajectoryDataset, d_s: TrajectoryDataset, features: FeatureMap,
                  delta=0.0, tol=1e-10, max_iters=500) -> Policy:
    """WBCU with linear-feature discriminators.

    Forms D^U = D^E + D^S, trains theta*_h at each step, then runs weighted
    BC on the union with threshold ``delta``.
    """
    if len(d_e) == 0:
        raise ValueError("WBCU needs at least one expert trajectory")
    d_u = union_counts(d_e, d_s)
    fit = fit_discriminators(d_e, d_u, features, tol=tol, max_iters=max_iters)
    return weighted_bc_policy(d_u, WeightTable(fit.weights, delta), d_u.shape[2])
