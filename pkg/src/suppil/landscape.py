"""Margin, Lipschitz and quadratic-growth quantities of the step discriminator.

Samples at one step are split into ``good`` pairs (expert data plus the
expert-collected part of the supplementary data) and ``bad`` pairs (the
sub-optimal part).  The checks here decide, from data alone, whether the
trained discriminator separates the two groups.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .discriminator import (StepObjective, minimize_step_loss, sigmoid_slope,
                            stacked_design)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class MarginUndefined(ValueError):
    pass


class NotSeparable(ValueError):
    pass


@dataclass(frozen=True)
class LabeledStepData:
    good: np.ndarray      # (n_good, 2) pairs
    bad: np.ndarray       # (n_bad, 2) pairs
    phi: np.ndarray       # (S, A, d)

    def __post_init__(self):
        good = np.asarray(self.good, dtype=np.int64).reshape(-1, 2)
        bad = np.asarray(self.bad, dtype=np.int64).reshape(-1, 2)
        # Lexicographic order makes first-occurrence argmin/argmax the
        # lexicographically smallest on ties.
        good = good[np.lexsort((good[:, 1], good[:, 0]))]
        bad = bad[np.lexsort((bad[:, 1], bad[:, 0]))]
        object.__setattr__(self, "good", good)
        object.__setattr__(self, "bad", bad)
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))

    @property
    def dim(self) -> int:
        return self.phi.shape[-1]

    def good_features(self):
        return self.phi[self.good[:, 0], self.good[:, 1]]

    def bad_features(self):
        return self.phi[self.bad[:, 0], self.bad[:, 1]]


@dataclass(frozen=True)
class Margin:
    value: float
    good_pair: tuple   # argmin of the score over good samples
    bad_pair: tuple    # argmax of the score over bad samples


def margin(theta, data: LabeledStepData) -> Margin:
    """min over good of <theta, phi> minus max over bad of <theta, phi>."""
    if len(data.good) == 0 or len(data.bad) == 0:
        raise MarginUndefined("margin undefined: good and bad sample sets must be nonempty")
    theta = np.asarray(theta, dtype=float)
    g = data.good_features() @ theta
    b = data.bad_features() @ theta
    i, j = int(np.argmin(g)), int(np.argmax(b))
    return Margin(float(g[i] - b[j]), tuple(int(x) for x in data.good[i]),
                  tuple(int(x) for x in data.bad[j]))


def _unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def _golden_max(f, lo, hi, xtol):
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2.0


def max_margin_direction(data: LabeledStepData, num_angles=4096, xtol=1e-8):
    """Unit vector with the largest margin, for feature dimension 1 or 2.

    Returns ``(theta_bar, margin_value)``.  Raises :class:`NotSeparable` when
    no unit vector has positive margin.
    """
    d = data.dim
    if d == 1:
        candidates = [np.array([1.0]), np.array([-1.0])]
        values = [margin(c, data).value for c in candidates]
        k = int(np.argmax(values))
        best, value = candidates[k], values[k]
    elif d == 2:
        g, b = data.good_features(), data.bad_features()
        if len(g) == 0 or len(b) == 0:
            raise MarginUndefined("margin undefined: good and bad sample sets must be nonempty")

        def value_at(angle):
            u = _unit(angle)
            return float(np.min(g @ u) - np.max(b @ u))

        angles = np.arange(num_angles) * (2.0 * math.pi / num_angles)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        scan = np.min(g @ dirs.T, axis=0) - np.max(b @ dirs.T, axis=0)
        k = int(np.argmax(scan))
        step = 2.0 * math.pi / num_angles
        angle = _golden_max(value_at, angles[k] - step, angles[k] + step, xtol)
        if value_at(angle) < scan[k]:
            angle = angles[k]
        best, value = _unit(angle), value_at(angle)
    else:
        raise ValueError(f"max-margin direction supports d in {{1, 2}}, got d={d}")
    if value <= 0:
        raise NotSeparable(f"instance is not linearly separable (best unit margin {value:.3g})")
    return best, value


def lipschitz_coefficient(theta, data: LabeledStepData) -> float:
    """||phi(good argmin) - phi(bad argmax)|| at ``theta``."""
    m = margin(theta, data)
    diff = data.phi[m.good_pair] - data.phi[m.bad_pair]
    return float(np.linalg.norm(diff))


def _segment(theta_star, theta_bar):
    theta_star = np.asarray(theta_star, dtype=float)
    delta = np.asarray(theta_bar, dtype=float) - theta_star
    return lambda t: theta_star + t * delta


def quadratic_growth_tau(theta_bar, theta_star, expert_step_samples, union_step_samples, phi_h,
                         method="hessian", num_points=257) -> float:
    """Curvature constant tau with L(theta_bar) >= L(theta*) + tau/2 ||theta_bar - theta*||^2.

    ``method="hessian"`` (default) takes the smallest Hessian eigenvalue of
    the loss along the segment from theta* to theta_bar: a grid of
    ``num_points`` values followed by golden-section refinement around the
    lowest grid point.

    ``method="bound"`` is the coarser closed form
    ``sigma_min(B)^2 * min_{t in {0, 1}} min_i weight_i g''((B theta^t)_i)``
    built from the per-sample design ``L = G(B theta)``.
    """
    B, weights = stacked_design(expert_step_samples, union_step_samples, phi_h)
    d = B.shape[1]
    if np.linalg.matrix_rank(B) < d:
        raise ValueError("rank deficient: stacked feature matrix has rank below d")
    point = _segment(theta_star, theta_bar)
    if method == "bound":
        sigma_min = np.linalg.svd(B, compute_uv=False)[-1]
        curv = min(np.min(weights * sigmoid_slope(B @ point(t))) for t in (0.0, 1.0))
        return float(sigma_min ** 2 * curv)
    if method != "hessian":
        raise ValueError(f"unknown method {method!r}")
    obj = StepObjective(expert_step_samples, union_step_samples, phi_h)

    def lam(t):
        return float(np.linalg.eigvalsh(obj.hess(point(t)))[0])

    ts = np.linspace(0.0, 1.0, num_points)
    vals = np.array([lam(t) for t in ts])
    k = int(np.argmin(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, num_points - 1)]
    t_ref = _golden_max(lambda t: -lam(t), lo, hi, 1e-10)
    return float(min(vals[k], lam(t_ref)))


@dataclass(frozen=True)
class RecoveryReport:
    lhs: float
    rhs: float
    holds: bool
    margin_at_theta_star: float
    tau: float
    lipschitz: float
    theta_star: np.ndarray
    theta_bar: np.ndarray
    loss_star: float
    loss_bar: float
    margin_bar: float

    @property
    def recovered(self) -> bool:
        return self.margin_at_theta_star > 0


def check_recovery_condition(data: LabeledStepData, expert_step_samples, union_step_samples,
                             tol=1e-10, tau_method="hessian") -> RecoveryReport:
    """Evaluate sqrt(2 (L(theta_bar) - L(theta*)) / tau) < margin(theta_bar) / L_h.

    When it holds, the trained discriminator has positive margin.
    """
    obj = StepObjective(expert_step_samples, union_step_samples, data.phi)
    theta_star = minimize_step_loss(obj, tol=tol)
    theta_bar, margin_bar = max_margin_direction(data)
    loss_star, loss_bar = obj.loss(theta_star), obj.loss(theta_bar)
    tau = quadratic_growth_tau(theta_bar, theta_star, expert_step_samples, union_step_samples,
                               data.phi, method=tau_method)
    lip = lipschitz_coefficient(theta_star, data)
    lhs = math.sqrt(2.0 * max(loss_bar - loss_star, 0.0) / tau)
    rhs = margin_bar / lip if lip > 0 else math.inf
    return RecoveryReport(lhs=lhs, rhs=rhs, holds=lhs < rhs,
                          margin_at_theta_star=margin(theta_star, data).value, tau=tau,
                          lipschitz=lip, theta_star=theta_star, theta_bar=theta_bar,
                          loss_star=loss_star, loss_bar=loss_bar, margin_bar=margin_bar)


@dataclass(frozen=True)
class D1Report:
    lhs_mean: float
    rhs_mean: float
    holds: bool


def check_d1_condition(d_e_step, d_s_step, phi_h, theta_bar_sign) -> D1Report:
    """One-dimensional condition: mean supplementary score < mean expert score."""
    phi_h = np.asarray(phi_h, dtype=float)
    if phi_h.shape[-1] != 1:
        raise ValueError("check_d1_condition needs one-dimensional features")
    e = np.asarray(d_e_step, dtype=np.int64).reshape(-1, 2)
    s = np.asarray(d_s_step, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0 or len(s) == 0:
        raise ValueError("expert and supplementary step samples must be nonempty")
    sign = float(np.sign(np.asarray(theta_bar_sign, dtype=float).reshape(-1)[0]))
    lhs = float(np.mean(phi_h[s[:, 0], s[:, 1], 0]) * sign)
    rhs = float(np.mean(phi_h[e[:, 0], e[:, 1], 0]) * sign)
    return D1Report(lhs, rhs, lhs < rhs)


CONDITION_COLUMNS = ("h", "lhs", "rhs", "holds", "margin_theta_star", "tau", "lipschitz")


def condition_csv(reports) -> str:
    """One CSV row per step for a sequence of :class:`RecoveryReport`."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONDITION_COLUMNS)
    for h, r in enumerate(reports):
        writer.writerow([h, repr(r.lhs), repr(r.rhs), str(r.holds).lower(),
                         repr(r.margin_at_theta_star), repr(r.tau), repr(r.lipschitz)])
    return buf.getvalue()
