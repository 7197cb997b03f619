"""Check batteries behind the CLI subcommands and the acceptance tests.

Each battery returns a list of row dicts plus an overall pass flag, so the
CLI can write them as CSV and the tests can assert on them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloning import bc_policy, wbcu_tabular
from .data import collect_datasets, make_stream, union_counts
from .discriminator import StepObjective, minimize_step_loss
from .harness import binomial_check
from .instances import (example1_instance, random_d1_instance, random_mdp, random_policy,
                        random_separable_instance)
from .landscape import (check_d1_condition, check_recovery_condition,
                        margin, max_margin_direction)

SQRT2_2 = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class Quantity:
    name: str
    value: float
    expected: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.value - self.expected) <= self.tolerance


@dataclass(frozen=True)
class Battery:
    rows: list
    passed: bool
    summary: str


def example1_quantities() -> list[Quantity]:
    """Every reported number of the worked discriminator example."""
    labeled, expert, union, _ = example1_instance()
    rep = check_recovery_condition(labeled, expert, union)
    obj = StepObjective(expert, union, labeled.phi)
    return [
        Quantity("theta_star_0", float(rep.theta_star[0]), -0.310, 1e-2),
        Quantity("theta_star_1", float(rep.theta_star[1]), 0.993, 1e-2),
        Quantity("loss_theta_star", rep.loss_star, 1.287, 1e-2),
        Quantity("theta_bar_0", float(rep.theta_bar[0]), -SQRT2_2, 1e-6),
        Quantity("theta_bar_1", float(rep.theta_bar[1]), SQRT2_2, 1e-6),
        Quantity("margin_theta_bar", rep.margin_bar, SQRT2_2, 1e-6),
        Quantity("loss_theta_bar", obj.loss(rep.theta_bar), 1.309, 1e-2),
        Quantity("lipschitz", rep.lipschitz, SQRT2_2, 0.0),
        Quantity("tau", rep.tau, 0.163, 5e-3),
        Quantity("lhs", rep.lhs, 0.520, 1e-2),
        Quantity("rhs", rep.rhs, 1.0, 1e-9),
        Quantity("condition_holds", float(rep.holds), 1.0, 0.0),
        Quantity("margin_theta_star_positive", float(rep.margin_at_theta_star > 0), 1.0, 0.0),
    ]


def example1_battery() -> Battery:
    qs = example1_quantities()
    rows = [{"quantity": q.name, "value": q.value, "expected": q.expected,
             "tolerance": q.tolerance, "pass": q.passed} for q in qs]
    ok = all(q.passed for q in qs)
    return Battery(rows, ok, f"example1: {sum(q.passed for q in qs)}/{len(qs)} quantities match")


def prop2_battery(trials=100, seed=0, max_states=8, max_actions=4, max_horizon=6,
                  max_trajectories=30, atol=1e-12) -> Battery:
    """Tabular WBCU against BC on random MDPs and random dataset draws."""
    rows = []
    for k in range(trials):
        rng = make_stream(seed, k)
        S = int(rng.integers(1, max_states + 1))
        A = int(rng.integers(2, max_actions + 1))
        H = int(rng.integers(1, max_horizon + 1))
        mdp = random_mdp(rng, S, A, H)
        expert = random_policy(rng, H, S, A)
        behavior = random_policy(rng, H, S, A)
        eta = float(rng.uniform(0.05, 0.95))
        n_tot = int(rng.integers(1, max_trajectories + 1))
        d_e, d_s = collect_datasets(mdp, expert, behavior, eta, n_tot, rng)
        bc = bc_policy(d_e, A).probs
        wbcu = wbcu_tabular(d_e, union_counts(d_e, d_s), A).probs
        diff = float(np.max(np.abs(bc - wbcu)))
        rows.append({"trial": k, "num_states": S, "num_actions": A, "h": H, "eta": eta,
                     "n_expert": len(d_e), "n_supplementary": len(d_s), "max_abs_diff": diff,
                     "pass": diff <= atol})
    n_ok = sum(r["pass"] for r in rows)
    return Battery(rows, n_ok == trials, f"prop2: {n_ok}/{trials} exact equalities")


def lipschitz_slack(data, theta_bar, thetas) -> float:
    """min over theta' of L(theta') ||theta_bar - theta'|| - (Delta(theta_bar) - Delta(theta'))."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    top = margin(theta_bar, data).value
    g, b = data.good_features(), data.bad_features()
    gs, bs = g @ thetas.T, b @ thetas.T
    # First-occurrence argmin/argmax on lexsorted samples: same pairs as margin().
    i, j = np.argmin(gs, axis=0), np.argmax(bs, axis=0)
    cols = np.arange(len(thetas))
    values = gs[i, cols] - bs[j, cols]
    lips = np.linalg.norm(g[i] - b[j], axis=1)
    dist = np.linalg.norm(thetas - theta_bar, axis=1)
    return float(np.min(lips * dist - (top - values)))


def landscape_battery(trials=200, seed=0, num_probes=1000) -> Battery:
    """Lipschitz, quadratic-growth, recovery-implication and 1-d equivalence checks."""
    rows = []
    for k in range(trials):
        rng = make_stream(seed, 0, k)
        labeled, e, _, u = random_separable_instance(rng)
        theta_bar, _ = max_margin_direction(labeled)
        probes = rng.normal(size=(num_probes, 2)) * rng.uniform(0.1, 3.0, size=(num_probes, 1))
        s1 = lipschitz_slack(labeled, theta_bar, probes)
        rows.append({"battery": "lipschitz", "trial": k, "slack": s1, "condition": "",
                     "margin_theta_star": "", "pass": s1 >= -1e-9})
        rep = check_recovery_condition(labeled, e, u)
        s2 = rep.loss_bar - rep.loss_star - 0.5 * rep.tau * float(
            np.sum((rep.theta_bar - rep.theta_star) ** 2))
        rows.append({"battery": "growth", "trial": k, "slack": s2, "condition": "",
                     "margin_theta_star": "", "pass": s2 >= -1e-9})
        rows.append({"battery": "separation", "trial": k, "slack": rep.rhs - rep.lhs,
                     "condition": rep.holds, "margin_theta_star": rep.margin_at_theta_star,
                     "pass": not rep.holds or rep.margin_at_theta_star > 0})
    for k in range(trials):
        rng = make_stream(seed, 1, k)
        labeled, e, s, u = random_d1_instance(rng)
        theta_bar, _ = max_margin_direction(labeled)
        theta_star = minimize_step_loss(StepObjective(e, u, labeled.phi), tol=1e-12)
        d1 = check_d1_condition(e, s, labeled.phi, theta_bar)
        m = margin(theta_star, labeled).value
        rows.append({"battery": "one_dim", "trial": k, "slack": d1.rhs_mean - d1.lhs_mean,
                     "condition": d1.holds, "margin_theta_star": m,
                     "pass": d1.holds == (m > 0)})
    ok = all(r["pass"] for r in rows)
    counts = {}
    for r in rows:
        c = counts.setdefault(r["battery"], [0, 0])
        c[0] += r["pass"]
        c[1] += 1
    summary = "landscape: " + ", ".join(f"{b} {p}/{n}" for b, (p, n) in counts.items())
    return Battery(rows, ok, summary)


def binomial_battery(ns, ps, identity_atol=1e-12) -> Battery:
    rows = []
    for n in ns:
        for p in ps:
            c = binomial_check(int(n), float(p))
            ident = c.identity_error <= identity_atol
            rows.append({"n": int(n), "p": float(p), "exact": c.exact,
                         "closed_form": c.closed_form, "bound": c.bound, "holds": c.holds,
                         "identity_ok": ident, "pass": c.holds and ident})
    n_ok = sum(r["pass"] for r in rows)
    return Battery(rows, n_ok == len(rows), f"binomial: {n_ok}/{len(rows)} cases pass")
