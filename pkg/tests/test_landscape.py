import math

import numpy as np
import pytest
from scipy.optimize import brentq

from suppil.data import make_stream
from suppil.discriminator import StepObjective, minimize_step_loss, sigmoid, sigmoid_slope, stacked_design
from suppil.instances import example1_instance, random_d1_instance, random_separable_instance
from suppil.landscape import (CONDITION_COLUMNS, LabeledStepData, MarginUndefined, NotSeparable,
                              check_d1_condition, check_recovery_condition, condition_csv,
                              lipschitz_coefficient, margin, max_margin_direction,
                              quadratic_growth_tau)

SQ = math.sqrt(2) / 2


def _line_data(good_vals, bad_vals):
    """1-d data where sample i is the pair (i, 0) with feature vals[i]."""
    vals = list(good_vals) + list(bad_vals)
    phi = np.array(vals, dtype=float).reshape(-1, 1, 1)
    idx = np.arange(len(vals))
    pairs = np.stack([idx, np.zeros_like(idx)], axis=1)
    return LabeledStepData(pairs[:len(good_vals)], pairs[len(good_vals):], phi)


def test_example1_margin_at_theta_bar():
    labeled, *_ = example1_instance()
    assert margin([-SQ, SQ], labeled).value == pytest.approx(SQ, abs=1e-15)


def test_margin_at_zero():
    labeled, *_ = example1_instance()
    assert margin([0.0, 0.0], labeled).value == 0.0


def test_negated_margin_brute_force():
    labeled, *_ = example1_instance()
    theta = np.array([-SQ, SQ])
    g = labeled.good_features() @ theta
    b = labeled.bad_features() @ theta
    assert margin(-theta, labeled).value == pytest.approx(-(g.max() - b.min()))


def test_margin_empty_side():
    labeled, *_ = example1_instance()
    empty = LabeledStepData(labeled.good, np.zeros((0, 2), int), labeled.phi)
    with pytest.raises(MarginUndefined, match="margin undefined"):
        margin([1.0, 0.0], empty)


def test_tie_breaking_is_lexicographic():
    phi = np.zeros((3, 2, 1))
    phi[0, 1] = phi[2, 0] = 1.0
    phi[1, 0] = -1.0
    data = LabeledStepData([(2, 0), (0, 1)], [(1, 0)], phi)
    assert margin([1.0], data).good_pair == (0, 1)


def test_scale_invariance():
    g = make_stream(1)
    labeled, *_ = random_separable_instance(g)
    theta = g.normal(size=2)
    for c in (0.1, 2.0, 17.0):
        assert margin(c * theta, labeled).value == pytest.approx(c * margin(theta, labeled).value)


def test_example1_max_margin():
    labeled, *_ = example1_instance()
    theta_bar, value = max_margin_direction(labeled)
    assert np.allclose(theta_bar, [-SQ, SQ], atol=1e-6)
    assert value == pytest.approx(SQ, abs=1e-6)


def test_one_dimensional_max_margin():
    theta_bar, value = max_margin_direction(_line_data([1.0, 2.0], [-1.0]))
    assert theta_bar.tolist() == [1.0] and value == 2.0


def test_max_margin_matches_dense_grid():
    for k in range(5):
        labeled, *_ = random_separable_instance(make_stream(2, k))
        _, value = max_margin_direction(labeled)
        ang = np.linspace(0, 2 * np.pi, 10 ** 6, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)])
        g = labeled.good_features() @ dirs
        b = labeled.bad_features() @ dirs
        best = float(np.max(g.min(axis=0) - b.max(axis=0)))
        assert abs(value - best) <= 1e-4
        assert value >= best - 1e-12


def test_max_margin_errors():
    phi = np.zeros((2, 1, 3))
    phi[0, 0, 0], phi[1, 0, 0] = 1.0, -1.0
    with pytest.raises(ValueError, match="d="):
        max_margin_direction(LabeledStepData([(0, 0)], [(1, 0)], phi))
    with pytest.raises(NotSeparable):
        max_margin_direction(_line_data([1.0, -2.0], [0.0]))


def test_example1_lipschitz_pair():
    labeled, e, u, _ = example1_instance()
    theta_star = minimize_step_loss(StepObjective(e, u, labeled.phi))
    m = margin(theta_star, labeled)
    assert (m.good_pair, m.bad_pair) == ((1, 1), (2, 2))
    assert lipschitz_coefficient(theta_star, labeled) == SQ


def test_lipschitz_zero_for_identical_features():
    phi = np.zeros((2, 1, 2))
    phi[:, 0] = [0.3, 0.4]
    data = LabeledStepData([(0, 0)], [(1, 0)], phi)
    assert lipschitz_coefficient([1.0, 2.0], data) == 0.0


def test_lipschitz_inequality_random():
    for k in range(10):
        g = make_stream(3, k)
        labeled, *_ = random_separable_instance(g)
        theta_bar, top = max_margin_direction(labeled)
        for t in g.normal(scale=2, size=(1000, 2)):
            rhs = lipschitz_coefficient(t, labeled) * np.linalg.norm(theta_bar - t)
            assert top - margin(t, labeled).value <= rhs + 1e-10


def test_example1_tau():
    labeled, e, u, _ = example1_instance()
    theta_star = minimize_step_loss(StepObjective(e, u, labeled.phi))
    tau = quadratic_growth_tau([-SQ, SQ], theta_star, e, u, labeled.phi)
    assert tau == pytest.approx(0.163, abs=5e-3)
    # dense-grid oracle for the smallest Hessian eigenvalue along the segment
    obj = StepObjective(e, u, labeled.phi)
    ts = np.linspace(0, 1, 20001)
    seg = [theta_star + t * (np.array([-SQ, SQ]) - theta_star) for t in ts]
    oracle = min(np.linalg.eigvalsh(obj.hess(p))[0] for p in seg)
    assert tau == pytest.approx(oracle, abs=1e-9)


def test_tau_degenerate_segment():
    labeled, e, u, _ = example1_instance()
    theta_star = minimize_step_loss(StepObjective(e, u, labeled.phi))
    B, w = stacked_design(e, u, labeled.phi)
    sigma = np.linalg.svd(B, compute_uv=False)[-1]
    expected = sigma ** 2 * np.min(w * sigmoid_slope(B @ theta_star))
    got = quadratic_growth_tau(theta_star, theta_star, e, u, labeled.phi, method="bound")
    assert got == pytest.approx(expected, rel=1e-12)
    hess = np.linalg.eigvalsh(StepObjective(e, u, labeled.phi).hess(theta_star))[0]
    assert quadratic_growth_tau(theta_star, theta_star, e, u, labeled.phi) == pytest.approx(hess)


def test_tau_bound_is_below_hessian_tau():
    labeled, e, u, _ = example1_instance()
    theta_star = minimize_step_loss(StepObjective(e, u, labeled.phi))
    lo = quadratic_growth_tau([-SQ, SQ], theta_star, e, u, labeled.phi, method="bound")
    hi = quadratic_growth_tau([-SQ, SQ], theta_star, e, u, labeled.phi)
    assert 0 < lo < hi


def test_tau_rank_deficient():
    phi = np.zeros((2, 1, 2))
    phi[0, 0] = [1.0, 0.0]
    phi[1, 0] = [-1.0, 0.0]
    with pytest.raises(ValueError, match="rank"):
        quadratic_growth_tau([1.0, 0.0], [0.5, 0.0], [(0, 0)], [(0, 0), (1, 0)], phi)


def test_growth_inequality_random():
    for k in range(20):
        labeled, e, _, u = random_separable_instance(make_stream(4, k))
        obj = StepObjective(e, u, labeled.phi)
        theta_star = minimize_step_loss(obj)
        theta_bar, _ = max_margin_direction(labeled)
        tau = quadratic_growth_tau(theta_bar, theta_star, e, u, labeled.phi)
        gap = obj.loss(theta_bar) - obj.loss(theta_star)
        assert gap >= 0.5 * tau * np.sum((theta_bar - theta_star) ** 2) - 1e-10


def test_example1_recovery():
    labeled, e, u, _ = example1_instance()
    rep = check_recovery_condition(labeled, e, u)
    assert rep.lhs == pytest.approx(0.520, abs=1e-2)
    assert rep.rhs == pytest.approx(1.0, abs=1e-12)
    assert rep.holds and rep.recovered


def test_recovery_with_zero_loss_gap():
    # 1-d data tuned so that the trained optimum is exactly the unit direction +1
    a = 1.0
    target = sigmoid(a) - 2 * sigmoid(-a)
    b = brentq(lambda x: x * sigmoid(-x) - target, 1e-6, 1.2)
    data = _line_data([a], [-b])
    e, u = data.good, np.vstack([data.good, data.bad])
    theta_star = minimize_step_loss(StepObjective(e, u, data.phi), tol=1e-13)
    assert theta_star[0] == pytest.approx(1.0, abs=1e-9)
    rep = check_recovery_condition(data, e, u, tol=1e-13)
    assert rep.lhs < 1e-6 and rep.holds and rep.recovered


def test_recovery_implication_random():
    for k in range(50):
        labeled, e, _, u = random_separable_instance(make_stream(5, k))
        rep = check_recovery_condition(labeled, e, u)
        if rep.holds:
            assert rep.margin_at_theta_star > 0


def test_d1_condition_examples():
    d = _line_data([0.5, 0.2], [-1.0])
    # expert sample 0 (score 0.5), supplementary sample 1 (score 0.2)
    assert check_d1_condition([(0, 0)], [(1, 0)], d.phi, [1.0]).holds
    same = _line_data([0.5, 0.5], [-1.0])
    assert not check_d1_condition([(0, 0)], [(1, 0)], same.phi, [1.0]).holds
    with pytest.raises(ValueError):
        check_d1_condition([], [(1, 0)], d.phi, [1.0])


def test_d1_equivalence_random():
    for k in range(50):
        labeled, e, s, u = random_d1_instance(make_stream(6, k))
        theta_bar, _ = max_margin_direction(labeled)
        theta_star = minimize_step_loss(StepObjective(e, u, labeled.phi), tol=1e-12)
        cond = check_d1_condition(e, s, labeled.phi, theta_bar).holds
        assert cond == (margin(theta_star, labeled).value > 0)


def test_condition_csv():
    labeled, e, u, _ = example1_instance()
    text = condition_csv([check_recovery_condition(labeled, e, u)])
    header, row = text.splitlines()
    assert tuple(header.split(",")) == CONDITION_COLUMNS
    assert row.split(",")[0] == "0" and row.split(",")[3] == "true"
