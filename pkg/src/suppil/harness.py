"""Monte-Carlo imitation-gap estimates, rate fits and the binomial check.

Trial ``k`` of :func:`estimate_gap` draws its data from ``make_stream(seed, k)``;
results do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cloning import bc_policy, nbcu_policy, wbcu_tabular
from .data import collect_datasets, make_stream, union_counts
from .discriminator import DiscriminatorError, FeatureMap, wbcu_featured
from .mdp import Policy, TabularMdp, policy_value

ALGORITHMS = ("BC", "NBCU", "WBCU-tabular", "WBCU-featured")
Z95 = 1.959963984540054

CSV_COLUMNS = ("experiment", "instance", "algorithm", "eta", "n_tot", "num_trials", "seed",
               "mean_gap", "ci95", "h", "num_states", "num_actions", "extra")


class TrialFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class GapEstimate:
    mean_gap: float
    ci95_halfwidth: float
    num_trials: int
    algorithm: str
    eta: float
    n_tot: int
    seed: int
    failures: int = 0
    gaps: tuple = ()

    @property
    def std_error(self) -> float:
        return self.ci95_halfwidth / Z95


def learn(algorithm, d_e, d_s, num_actions, features: FeatureMap | None = None, delta=0.0,
          tol=1e-10) -> Policy:
    """Run one of the learners in :data:`ALGORITHMS` on a dataset pair."""
    if algorithm == "BC":
        return bc_policy(d_e, num_actions)
    if algorithm == "NBCU":
        return nbcu_policy(union_counts(d_e, d_s), num_actions)
    if algorithm == "WBCU-tabular":
        return wbcu_tabular(d_e, union_counts(d_e, d_s), num_actions, delta)
    if algorithm == "WBCU-featured":
        if features is None:
            raise ValueError("WBCU-featured needs a feature map")
        return wbcu_featured(d_e, d_s, features, delta=delta, tol=tol)
    raise ValueError(f"unknown algorithm {algorithm!r}; supported: {', '.join(ALGORITHMS)}")


def _trial_chunk(mdp, expert, behavior, algorithm, eta, n_tot, seed, trials, features, delta,
                 tol, v_expert):
    out = []
    for k in trials:
        rng = make_stream(seed, k)
        d_e, d_s = collect_datasets(mdp, expert, behavior, eta, n_tot, rng)
        try:
            learned = learn(algorithm, d_e, d_s, mdp.num_actions, features, delta, tol)
        except (DiscriminatorError, ValueError) as exc:
            out.append((k, None, str(exc)))
            continue
        out.append((k, v_expert - policy_value(mdp, learned), None))
    return out


def _chunks(n, parts):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(parts)]


def estimate_gap(mdp: TabularMdp, expert: Policy, behavior: Policy, algorithm: str, eta: float,
                 n_tot: int, num_trials: int, seed: int, features: FeatureMap | None = None,
                 delta=0.0, tol=1e-10, exclude_failures=False, jobs=1,
                 executor=None) -> GapEstimate:
    """Mean of V(expert) - V(learned) over independent dataset draws, with a 95% CI."""
    if num_trials < 2:
        raise ValueError("num_trials must be at least 2")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; supported: {', '.join(ALGORITHMS)}")
    v_expert = policy_value(mdp, expert)
    args = (mdp, expert, behavior, algorithm, eta, n_tot, seed)
    tail = (features, delta, tol, v_expert)
    if executor is None and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return estimate_gap(mdp, expert, behavior, algorithm, eta, n_tot, num_trials, seed,
                                features, delta, tol, exclude_failures, jobs, pool)
    if executor is None:
        results = _trial_chunk(*args, range(num_trials), *tail)
    else:
        futures = [executor.submit(_trial_chunk, *args, chunk, *tail)
                   for chunk in _chunks(num_trials, 4 * max(jobs, 1))]
        results = [item for f in futures for item in f.result()]
    results.sort(key=lambda item: item[0])
    failures = [(k, msg) for k, gap, msg in results if gap is None]
    if failures and not exclude_failures:
        k, msg = failures[0]
        raise TrialFailure(f"{len(failures)} of {num_trials} trials failed; trial {k}: {msg}")
    gaps = np.array([gap for _, gap, _ in results if gap is not None])
    if len(gaps) < 2:
        raise TrialFailure("fewer than two successful trials")
    half = Z95 * gaps.std(ddof=1) / math.sqrt(len(gaps))
    return GapEstimate(float(gaps.mean()), float(half), len(gaps), algorithm, float(eta),
                       int(n_tot), int(seed), len(failures), tuple(float(g) for g in gaps))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


def rate_fit(points) -> RateFit:
    """Least squares line through (log n, log gap)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("rate_fit needs at least three (n, gap) points")
    if np.any(pts <= 0):
        raise ValueError("rate_fit needs strictly positive n and gap values")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)


@dataclass(frozen=True)
class BinomialCheck:
    exact: float
    closed_form: float
    bound: float
    holds: bool

    @property
    def identity_error(self) -> float:
        return abs(self.exact - self.closed_form)


def binomial_check(n: int, p: float) -> BinomialCheck:
    """E[1 / (X + 1)] for X ~ Bin(n, p) against the bound 1 / (n p)."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    log_p, log_q = math.log(p), math.log1p(-p)
    exact = math.fsum(
        math.exp(math.lgamma(n + 1) - math.lgamma(x + 1) - math.lgamma(n - x + 1)
                 + x * log_p + (n - x) * log_q) / (x + 1)
        for x in range(n + 1))
    closed = -math.expm1((n + 1) * log_q) / ((n + 1) * p)
    bound = 1.0 / (n * p)
    return BinomialCheck(exact, closed, bound, exact <= bound)


def nbcu_lower_bound(mdp, expert, behavior, eta):
    """Lower bound on the NBCU gap for the standard imitation instance.

    ``(1 - eta) (V(expert) - V(behavior))`` when eta >= 1/|A|, half of that
    otherwise.
    """
    dv = policy_value(mdp, expert) - policy_value(mdp, behavior)
    full = (1.0 - eta) * dv
    return full if eta >= 1.0 / mdp.num_actions else full / 2.0


def relative_variation(values) -> float:
    """(max - min) / mean of a list of positive numbers."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.mean())


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _extra(pairs) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in pairs)


def run_suite(config, jobs=1, log=None) -> list[list[str]]:
    """Run every experiment of a parsed :class:`~suppil.config.SuiteConfig`.

    Returns CSV rows (header first).  Each experiment yields one row per
    (algorithm, eta, n_tot) cell, then one rate-fit row per algorithm when
    the experiment asks for it, and a variation row when ``max_variation`` is
    set.
    """
    rows = [list(CSV_COLUMNS)]
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for exp in config.experiments:
            mdp, expert, behavior = exp.instance.build()
            features = exp.features.build(mdp) if exp.features is not None else None
            H, S, A = mdp.shape
            for algorithm in exp.algorithms:
                points, gaps = [], []
                for eta, n_tot in exp.cells():
                    est = estimate_gap(mdp, expert, behavior, algorithm, eta, n_tot, exp.trials,
                                       exp.seed, features=features, delta=exp.delta, tol=exp.tol,
                                       exclude_failures=exp.exclude_failures, jobs=jobs,
                                       executor=pool)
                    extra = [("failures", est.failures), ("se", est.std_error)]
                    if exp.lower_bound == "nbcu":
                        bound = nbcu_lower_bound(mdp, expert, behavior, eta)
                        extra += [("bound", bound),
                                  ("holds", est.mean_gap >= bound - 3.0 * est.ci95_halfwidth),
                                  ("regime", "eta>=1/A" if eta >= 1.0 / A else "eta<1/A"),
                                  ("n_tot_ok", n_tot >= S * math.log(2.0))]
                    rows.append([exp.name, exp.instance.name, algorithm, _fmt(float(eta)),
                                 str(n_tot), str(exp.trials), str(exp.seed), _fmt(est.mean_gap),
                                 _fmt(est.ci95_halfwidth), str(H), str(S), str(A), _extra(extra)])
                    if log is not None:
                        log(f"{exp.name} {algorithm} eta={eta:g} n_tot={n_tot}: "
                            f"gap {est.mean_gap:.6g} +/- {est.ci95_halfwidth:.3g}")
                    x = n_tot if exp.rate_vs == "n_tot" else eta * n_tot
                    points.append((x, max(est.mean_gap, exp.rate_floor)))
                    gaps.append(est.mean_gap)
                if exp.rate_vs != "none" and len(points) >= 3:
                    fit = rate_fit(points)
                    extra = [("kind", "rate"), ("vs", exp.rate_vs), ("slope", fit.slope),
                             ("intercept", fit.intercept), ("r_squared", fit.r_squared),
                             ("floor", float(exp.rate_floor))]
                    if exp.slope_range is not None:
                        lo, hi = exp.slope_range
                        extra.append(("holds", lo <= fit.slope <= hi))
                    rows.append([exp.name, exp.instance.name, algorithm, "", "", str(exp.trials),
                                 str(exp.seed), "", "", str(H), str(S), str(A), _extra(extra)])
                if exp.max_variation is not None:
                    variation = relative_variation(gaps)
                    extra = [("kind", "variation"), ("value", variation),
                             ("max", float(exp.max_variation)),
                             ("holds", variation < exp.max_variation)]
                    rows.append([exp.name, exp.instance.name, algorithm, "", "", str(exp.trials),
                                 str(exp.seed), "", "", str(H), str(S), str(A), _extra(extra)])
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()
